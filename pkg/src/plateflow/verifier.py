"""Independent oracles for the nonlocal formulation and the linear assembly.

Two checks live here.  The divergence identity and the two-surface flux
identity are exercised with manufactured harmonic functions.  The assembly
oracle back-substitutes eigenpairs of ``M(k)`` into the linearised
internal, external and Bernoulli equations, which are coded here from
scratch and share nothing with :mod:`plateflow.spectral_matrices`.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .channel_model import ValidatedConfig, make_config
from .errors import QuadratureBudgetExceeded, SingularXiSolve, ZeroWavenumber
from .linalg_kernels import eigenvalues
from .spectral_matrices import build_abc, build_generator, generator_from_abc, SpectralMatrices, TriSym

Fn = Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# manufactured potentials


@dataclass(frozen=True)
class ManufacturedPotential:
    """Closed-form ``phi(x, y)`` with analytic first derivatives."""

    name: str
    phi: Fn
    phi_x: Fn
    phi_y: Fn

    def laplacian_residual(self, x, y, h: float = 1e-3) -> np.ndarray:
        """``|d_x phi_x + d_y phi_y|`` with fourth-order differences of the analytic gradient."""
        fx, fy = self.phi_x, self.phi_y
        dxx = (8 * (fx(x + h, y) - fx(x - h, y)) - (fx(x + 2 * h, y) - fx(x - 2 * h, y))) / (12 * h)
        dyy = (8 * (fy(x, y + h) - fy(x, y - h)) - (fy(x, y + 2 * h) - fy(x, y - 2 * h))) / (12 * h)
        return np.abs(dxx + dyy)

    def decay_bound(self, X0: float, ymin: float, ymax: float, samples: int = 201) -> float:
        """``sup |phi| + |grad phi|`` over ``|x| >= X0`` in the strip (sampled)."""
        x = np.concatenate([np.linspace(X0, 4 * X0, samples), -np.linspace(X0, 4 * X0, samples)])
        X, Y = np.meshgrid(x, np.linspace(ymin, ymax, 21))
        return float((np.abs(self.phi(X, Y)) + np.hypot(self.phi_x(X, Y), self.phi_y(X, Y))).max())


def _entire(name: str, f, fp) -> ManufacturedPotential:
    # phi = Re f(z): phi_x = Re f'(z), phi_y = -Im f'(z)
    return ManufacturedPotential(
        name,
        lambda x, y: np.real(f(x + 1j * y)),
        lambda x, y: np.real(fp(x + 1j * y)),
        lambda x, y: -np.imag(fp(x + 1j * y)),
    )


def gaussian_potential() -> ManufacturedPotential:
    """``Re exp(-(x + iy)^2)``: harmonic, Gaussian decay along any strip."""
    return _entire("re_exp_minus_z2", lambda z: np.exp(-z * z), lambda z: -2 * z * np.exp(-z * z))


def shifted_gaussian_potential(a: float = 0.3, s: float = 0.7) -> ManufacturedPotential:
    """``Re exp(-s (z - a)^2)`` for a second, less symmetric test."""
    return _entire(
        f"re_exp_minus_{s:g}(z-{a:g})2",
        lambda z: np.exp(-s * (z - a) ** 2),
        lambda z: -2 * s * (z - a) * np.exp(-s * (z - a) ** 2),
    )


def quadratic_potential() -> ManufacturedPotential:
    return _entire("x2_minus_y2", lambda z: z * z, lambda z: 2 * z)


def product_potential() -> ManufacturedPotential:
    # xy = Re(-i z^2 / 2)
    return _entire("xy", lambda z: -0.5j * z * z, lambda z: -1j * z)


def constant_potential(c: float = 1.0) -> ManufacturedPotential:
    zero = lambda x, y: np.zeros(np.broadcast(x, y).shape)  # noqa: E731
    return ManufacturedPotential("constant", lambda x, y: c + zero(x, y), zero, zero)


def nonharmonic_x2() -> ManufacturedPotential:
    """``x^2`` (Laplacian 2): negative control."""
    return ManufacturedPotential(
        "x2_nonharmonic",
        lambda x, y: x**2 + 0 * y,
        lambda x, y: 2 * x + 0 * y,
        lambda x, y: 0 * x + 0 * y,
    )


# ---------------------------------------------------------------------------
# divergence identity


def divergence_residual(u: ManufacturedPotential, v: ManufacturedPotential, point, h: float = 1e-4) -> float:
    """``|d_x(u_y v_x + v_y u_x) + d_y(u_y v_y - u_x v_x)|`` by central differences.

    The first derivatives are analytic; the outer derivative uses the
    fourth-order five-point stencil with step ``h``.
    """
    x, y = map(float, point)

    def e1(x, y):
        return u.phi_y(x, y) * v.phi_x(x, y) + v.phi_y(x, y) * u.phi_x(x, y)

    def e2(x, y):
        return u.phi_y(x, y) * v.phi_y(x, y) - u.phi_x(x, y) * v.phi_x(x, y)

    def d(f, ax, ay):
        # fourth-order central difference
        return (8 * (f(x + ax, y + ay) - f(x - ax, y - ay)) - (f(x + 2 * ax, y + 2 * ay) - f(x - 2 * ax, y - 2 * ay))) / (12 * h)

    return float(abs(d(e1, h, 0.0) + d(e2, 0.0, h)))


# ---------------------------------------------------------------------------
# flux identity on two static surfaces


@dataclass(frozen=True)
class StaticSurfacePair:
    """Lower and upper surfaces ``y = bottom(x)``, ``y = top(x)`` with slopes."""

    bottom: Callable[[np.ndarray], np.ndarray]
    bottom_slope: Callable[[np.ndarray], np.ndarray]
    top: Callable[[np.ndarray], np.ndarray]
    top_slope: Callable[[np.ndarray], np.ndarray]
    X0: float = 10.0

    def separation(self, samples: int = 2001) -> float:
        x = np.linspace(-self.X0, self.X0, samples)
        return float((self.top(x) - self.bottom(x)).min())


def flat_surfaces(lo: float = 0.0, hi: float = 1.0, X0: float = 10.0) -> StaticSurfacePair:
    c = lambda v: (lambda x: v + 0 * np.asarray(x, dtype=float))  # noqa: E731
    return StaticSurfacePair(c(lo), c(0.0), c(hi), c(0.0), X0)


def curved_surfaces(X0: float = 10.0) -> StaticSurfacePair:
    """``0.2 sech x`` below and ``1 + 0.3 exp(-x^2)`` above."""
    return StaticSurfacePair(
        lambda x: 0.2 / np.cosh(x),
        lambda x: -0.2 * np.tanh(x) / np.cosh(x),
        lambda x: 1.0 + 0.3 * np.exp(-(x**2)),
        lambda x: -0.6 * x * np.exp(-(x**2)),
        X0,
    )


def _flux_integrand(phi: ManufacturedPotential, k: float, kappa: float, eta, eta_p):
    def f(x):
        y = eta(x)
        v = np.exp(-1j * k * x + kappa * y)
        px, py = phi.phi_x(x, y), phi.phi_y(x, y)
        Fx = v * (kappa * px - 1j * k * py)
        Fy = v * (kappa * py + 1j * k * px)
        return -eta_p(x) * Fx + Fy

    return f


def _quad(f, X0: float, limit: int, epsabs: float = 1e-15, epsrel: float = 1e-13) -> complex:
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", IntegrationWarning)
        val, _ = quad(f, -X0, X0, limit=limit, epsabs=epsabs, epsrel=epsrel, complex_func=True)
    for w in caught:
        # roundoff warnings only mean the tolerance is below attainable accuracy
        if "subdivisions" in str(w.message):
            raise QuadratureBudgetExceeded(f"adaptive quadrature hit its {limit}-interval budget")
    return complex(val)


def boundary_flux_residual(
    phi: ManufacturedPotential,
    surfaces: StaticSurfacePair,
    k: float,
    kappa_sign: int = 1,
    limit: int = 400,
    relative: bool = True,
) -> float:
    """Flux of ``e^{-ikx + kappa y}``-weighted field through both surfaces.

    With ``kappa = +-k`` the field is divergence free between the surfaces,
    so top minus bottom must vanish.  Returned relative to the integral of
    the absolute integrands unless ``relative`` is False.
    """
    if kappa_sign not in (1, -1):
        raise ValueError("kappa_sign must be +1 or -1")
    kappa = kappa_sign * k
    top = _flux_integrand(phi, k, kappa, surfaces.top, surfaces.top_slope)
    bot = _flux_integrand(phi, k, kappa, surfaces.bottom, surfaces.bottom_slope)
    X0 = surfaces.X0
    diff = _quad(top, X0, limit) - _quad(bot, X0, limit)
    if not relative:
        return abs(diff)
    scale = _quad(lambda x: abs(top(x)) + abs(bot(x)), X0, limit).real
    return abs(diff) / scale if scale > 0 else abs(diff)


# ---------------------------------------------------------------------------
# linear assembly oracle


def _layer_xi(k, lam, U, d, eta_lo, pi_lo, eta_hi, pi_hi):
    """Boundary potentials of one interior layer from the internal pair.

    The pair is translation invariant in ``y``, so it is written twice: with
    the origin on the lower plate and on the upper plate, each divided by
    ``cosh(k d)``.  The stacked 4x2 system stays well conditioned for thick
    layers, where either frame alone loses one unknown to ``exp(-|k| d)``.
    """
    with np.errstate(over="ignore"):
        sech = 1.0 / np.cosh(k * d)
    th = np.tanh(k * d)
    a_lo = pi_lo + 1j * k * U * eta_lo
    a_hi = pi_hi + 1j * k * U * eta_hi
    S = np.array([
        [k, -k * sech],  # lower origin, first relation
        [k * th, 0.0],  # lower origin, second relation
        [k * sech, -k],  # upper origin, first relation
        [0.0, k * th],  # upper origin, second relation
    ])
    rhs = np.array([a_hi * th, a_hi - a_lo * sech, a_lo * th, a_hi * sech - a_lo])
    if np.linalg.svd(S, compute_uv=False)[-1] < 1e-12 * max(abs(k), 1e-300):
        raise SingularXiSolve("internal potential system is singular", k=k)
    (xi_plus, xi_minus), *_ = np.linalg.lstsq(S.astype(complex), rhs, rcond=None)
    return xi_plus, xi_minus


def recover_potentials(config: ValidatedConfig, k: float, lam: complex, w: np.ndarray):
    """``xi_i^-`` (lower surface) and ``xi_i^+`` (upper surface) of each gap."""
    n = config.n
    eta, pi = w[:n], w[n:]
    U, d = config.flows, config.gaps
    xi_minus = np.full(n + 1, np.nan, dtype=complex)
    xi_plus = np.full(n + 1, np.nan, dtype=complex)
    with np.errstate(over="ignore"):
        # bottom gap: only the upper surface (plate 1) moves
        xi_plus[0] = (pi[0] + 1j * k * U[0] * eta[0]) / (k * np.tanh(k * d[0]))
        # top gap: only the lower surface (plate n) moves
        xi_minus[n] = -(pi[n - 1] + 1j * k * U[n] * eta[n - 1]) / (k * np.tanh(k * d[n]))
    for i in range(1, n):
        xi_plus[i], xi_minus[i] = _layer_xi(k, lam, U[i], d[i], eta[i - 1], pi[i - 1], eta[i], pi[i])
    return xi_minus, xi_plus


def bernoulli_residuals(config: ValidatedConfig, k: float, lam: complex, w: np.ndarray) -> np.ndarray:
    """Residual of each plate's linear Bernoulli condition.

    Normalised by the largest single term over all plates, so plates that
    an eigenvector barely touches do not amplify round-off.
    """
    n = config.n
    eta, pi = w[:n], w[n:]
    U = config.flows
    xi_minus, xi_plus = recover_potentials(config, k, lam, w)
    terms = np.array([
        lam * pi,
        k**4 * eta,
        (lam + 1j * k * U[:-1]) * xi_plus[:-1],
        -(lam + 1j * k * U[1:]) * xi_minus[1:],
    ])
    scale = np.abs(terms).max()
    return np.abs(terms.sum(axis=0)) / scale if scale > 0 else np.zeros(n)


def assembly_residuals(config: ValidatedConfig, k: float, M: np.ndarray | None = None) -> np.ndarray:
    """Max Bernoulli residual for every eigenpair of ``M`` (default ``M(k)``)."""
    k = float(k)
    if k == 0.0:
        raise ZeroWavenumber("the assembly oracle needs k != 0", k=k)
    if M is None:
        M = build_generator(config, k).M
    sample = eigenvalues(M, k=k, vectors=True)
    out = []
    for lam, w in zip(sample.eigenvalues, sample.eigenvectors.T):
        out.append(bernoulli_residuals(config, k, lam, w).max())
    return np.array(out)


def assembly_residual(config: ValidatedConfig, k: float, M: np.ndarray | None = None) -> float:
    return float(assembly_residuals(config, k, M).max())


def corrupted_generator(config: ValidatedConfig, k: float, entry: int | None = None, off: bool = False) -> np.ndarray:
    """``M(k)`` rebuilt with one entry of ``C`` sign-flipped (fault injection).

    By default the largest diagonal entry is flipped.
    """
    sm = build_abc(config, k)
    diag, offd = sm.C.diag.copy(), sm.C.off.copy()
    if entry is None:
        entry = int(np.argmax(np.abs(offd if off else diag)))
    if off:
        offd[entry] = -offd[entry]
    else:
        diag[entry] = -diag[entry]
    bad = SpectralMatrices(sm.k, sm.A, sm.B, TriSym(diag, offd))
    return generator_from_abc(bad).M


# ---------------------------------------------------------------------------
# battery


@dataclass(frozen=True)
class Case:
    id: str
    residual: float
    threshold: float
    passed: bool
    expect: str = "below"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "residual": self.residual,
            "threshold": self.threshold,
            "expect": self.expect,
            "pass": self.passed,
        }


def _below(cid, r, thr):
    return Case(cid, float(r), thr, bool(r <= thr))


def _above(cid, r, thr):
    return Case(cid, float(r), thr, bool(r > thr), "above")


def run_battery(seed: int = 0, configs: int = 10) -> list[Case]:
    """Every oracle at its stated tolerance, plus negative controls."""
    rng = np.random.default_rng(seed)
    cases: list[Case] = []
    g = gaussian_potential()
    pts = np.column_stack([rng.uniform(-2, 2, 5), rng.uniform(0, 1, 5)])
    for j, p in enumerate(pts):
        cases.append(_below(f"div/poly/{j}", divergence_residual(quadratic_potential(), product_potential(), p), 1e-6))
        cases.append(_below(f"div/gauss/{j}", divergence_residual(g, g, p), 1e-6))
        cases.append(_above(f"div/nonharmonic/{j}", divergence_residual(quadratic_potential(), nonharmonic_x2(), p), 1e-2))
    for k in (0.5, 1.0, 3.0):
        for s in (1, -1):
            cases.append(_below(f"flux/flat/k{k:g}/{s:+d}", boundary_flux_residual(g, flat_surfaces(), k, s), 1e-8))
            cases.append(_below(f"flux/curved/k{k:g}/{s:+d}", boundary_flux_residual(g, curved_surfaces(), k, s), 1e-7))
    cases.append(_below("flux/constant", boundary_flux_residual(constant_potential(), curved_surfaces(), 1.0, 1, relative=False), 0.0))
    fig2 = make_config([1.0] * 7, [0.1] * 7)
    cases.append(_below("assembly/fig2/k0.3", assembly_residual(fig2, 0.3), 1e-8))
    cases.append(_above("mutation/fig2/k0.3", assembly_residual(fig2, 0.3, corrupted_generator(fig2, 0.3)), 1e-2))
    for c in range(configs):
        n = int(rng.integers(1, 7))
        cfg = make_config(rng.uniform(0.5, 10, n + 1), rng.uniform(-1, 1, n + 1))
        k = float(rng.uniform(0.05, 5) * rng.choice([-1, 1]))
        base = assembly_residual(cfg, k)
        cases.append(_below(f"assembly/random{c}/k{k:.3f}", base, 1e-8))
        mutated = assembly_residual(cfg, k, corrupted_generator(cfg, k))
        cases.append(_above(f"mutation/random{c}/k{k:.3f}", mutated, 1e4 * max(base, 1e-16)))
    return cases


def write_report(cases: list[Case], path) -> Path:
    path = Path(path)
    path.write_text(json.dumps([c.to_dict() for c in cases], indent=2) + "\n", encoding="utf-8")
    return path
