"""Spectral stability of the plate channel.

The channel is asymptotically stable exactly when every mean flow vanishes.
This module treats that statement as ground truth and corroborates it
numerically: spectral abscissa scans over ``k``, the discriminant
inequality that certifies eigenvalues off the imaginary axis, the small-``k``
growth rate and the Green's function ``(1/2 pi) int exp(t G(k)) dk`` along a
ray ``x = V t`` with ``G(k) = ikV + M(k)``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from .channel_model import ValidatedConfig
from .errors import FlatSpectrum, InconsistentEvidence, NonConvergentQuadrature
from .linalg_kernels import SpectrumSample, eigenvalues, expm_batch, track_branches
from .spectral_matrices import build_generator_batch

STABLE_TOL = 1e-9  # eigensolver noise allowed on the abscissa
UNSTABLE_TOL = 1e-6  # abscissa that counts as genuine growth
FLAT_TOL = 1e-13
BISECT_TOL = 1e-8
SLOPE_WINDOW = (1e-4, 1e-2)


def default_kgrid(config: ValidatedConfig | None = None, kmax: float = 50.0) -> np.ndarray:
    """Nonnegative scan grid, dense near zero where instability lives.

    The abscissa is even in ``k``, so scanning ``k >= 0`` suffices.
    """
    return np.unique(np.concatenate([[0.0], np.geomspace(1e-6, 1.0, 121), np.linspace(1.0, kmax, 246)]))


# ---------------------------------------------------------------------------
# spectrum scans


@dataclass(frozen=True)
class ScanResult:
    """Spectra over a ``k`` grid, with eigenvalue branches tracked across it."""

    k: np.ndarray
    samples: list[SpectrumSample]
    branches: np.ndarray
    crossings: np.ndarray
    V: float = 0.0

    @property
    def abscissa(self) -> np.ndarray:
        return np.array([s.abscissa for s in self.samples])

    def csv_rows(self):
        m = self.branches.shape[1]
        yield ["k"] + [f"re{j}" for j in range(1, m + 1)] + [f"im{j}" for j in range(1, m + 1)] + ["alpha"]
        for kk, lam, a in zip(self.k, self.branches, self.abscissa):
            yield [f"{v:.16e}" for v in (kk, *lam.real, *lam.imag, a)]


def _spectra(stack: np.ndarray, ks: np.ndarray) -> list[SpectrumSample]:
    return [eigenvalues(M, k=float(k)) for M, k in zip(stack, ks)]


def spectrum_scan(config: ValidatedConfig, kgrid, V: float = 0.0, workers: int | None = None) -> ScanResult:
    """Eigenvalues of ``ikV + M(k)`` at every grid point.

    Parameters
    ----------
    workers : int, optional
        Thread count for the eigenvalue map; results keep grid order.
    """
    ks = np.asarray(kgrid, dtype=float).reshape(-1)
    stack = build_generator_batch(config, ks)
    if V:
        stack = stack + (1j * V * ks)[:, None, None] * np.eye(2 * config.n)
    if workers and workers > 1 and ks.size > workers:
        chunks = np.array_split(np.arange(ks.size), workers)
        with ThreadPoolExecutor(workers) as pool:
            parts = pool.map(lambda idx: _spectra(stack[idx], ks[idx]), chunks)
        samples = [s for part in parts for s in part]
    else:
        samples = _spectra(stack, ks)
    branches, crossings = track_branches([s.eigenvalues for s in samples])
    return ScanResult(ks, samples, branches, crossings, V)


def abscissa(config: ValidatedConfig, ks) -> np.ndarray:
    """``max Re lambda(M(k))`` for each ``k`` (no residual checks; fast path)."""
    ks = np.asarray(ks, dtype=float).reshape(-1)
    return np.linalg.eigvals(build_generator_batch(config, ks)).real.max(axis=1)


# ---------------------------------------------------------------------------
# discriminant inequality


def discriminant_margin(config: ValidatedConfig, k) -> np.ndarray:
    """Right minus left side of the tanh inequality, one column per plate.

    Positive entries certify an eigenvalue of ``M(k)`` off the imaginary
    axis.  Shape ``(len(k), n)``.
    """
    k = np.atleast_1d(np.asarray(k, dtype=float))
    th = np.tanh(0.5 * np.outer(k, config.gaps))
    U = config.flows
    tb, ta = th[:, :-1], th[:, 1:]
    lhs = (U[1:] * ta + U[:-1] * tb) ** 2
    rhs = (-(k**3)[:, None] + U[1:] ** 2 * ta + U[:-1] ** 2 * tb) * (k[:, None] + ta + tb)
    return rhs - lhs


@dataclass(frozen=True)
class Intervals:
    """Wavenumber intervals where the discriminant inequality holds."""

    per_plate: list[list[tuple[float, float]]]
    union: list[tuple[float, float]]

    @property
    def empty(self) -> bool:
        return not self.union

    def contains(self, k: float) -> bool:
        return any(a < k < b for a, b in self.union)

    def to_dict(self) -> dict:
        return {
            "union": [list(iv) for iv in self.union],
            "per_plate": [[list(iv) for iv in ivs] for ivs in self.per_plate],
        }


def _merge(intervals: list[tuple[float, float]]) -> list[tuple[float, float]]:
    out: list[list[float]] = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [(a, b) for a, b in out]


def _edge(f, a: float, b: float, fa: float, fb: float) -> float:
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    return bisect(f, a, b, xtol=BISECT_TOL)


def pd_intervals(config: ValidatedConfig, kgrid=None) -> Intervals:
    """Intervals of ``k`` satisfying the strict discriminant inequality.

    Sign changes on ``kgrid`` are refined by bisection to ``1e-8``; the
    union over plates is the certified-unstable set ``K``.
    """
    ks = np.sort(np.asarray(default_kgrid() if kgrid is None else kgrid, dtype=float))
    g = discriminant_margin(config, ks)
    per_plate = []
    for i in range(config.n):
        f = lambda k, i=i: float(discriminant_margin(config, k)[0, i])  # noqa: E731
        gi = g[:, i]
        inside = gi > 0
        ivs = []
        j = 0
        while j < ks.size:
            if not inside[j]:
                j += 1
                continue
            start = j
            while j + 1 < ks.size and inside[j + 1]:
                j += 1
            lo = ks[start] if start == 0 else _edge(f, ks[start - 1], ks[start], gi[start - 1], gi[start])
            hi = ks[j] if j == ks.size - 1 else _edge(f, ks[j], ks[j + 1], gi[j], gi[j + 1])
            ivs.append((float(lo), float(hi)))
            j += 1
        per_plate.append(ivs)
    return Intervals(per_plate, _merge([iv for ivs in per_plate for iv in ivs]))


# ---------------------------------------------------------------------------
# small-k growth


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares fit ``alpha(k) = c k + d k^2`` on a small-``k`` window."""

    c: float
    d: float
    residual: float
    c_width: float
    k: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    @property
    def quadratic_relative(self) -> float:
        """``|d| k_max / |c|``: size of the quadratic term at the window edge."""
        return abs(self.d) * float(self.k.max()) / abs(self.c)

    @property
    def linearity(self) -> float:
        """Fit residual relative to ``|c| k_max``."""
        return self.residual / (abs(self.c) * float(self.k.max()))


def growth_slope(config: ValidatedConfig, window=SLOPE_WINDOW, samples: int = 25) -> GrowthFit:
    """Leading-order growth rate ``c`` of the abscissa as ``k -> 0``.

    Raises :class:`FlatSpectrum` when no real part rises above round-off.
    """
    ks = np.geomspace(window[0], window[1], samples)
    alpha = abscissa(config, ks)
    if alpha.max() <= FLAT_TOL:
        raise FlatSpectrum(f"abscissa never exceeds {FLAT_TOL:g} on [{window[0]:g}, {window[1]:g}]")
    X = np.column_stack([ks, ks**2])
    (c, d), *_ = np.linalg.lstsq(X, alpha, rcond=None)
    residual = float(np.abs(X @ np.array([c, d]) - alpha).max())
    return GrowthFit(float(c), float(d), residual, float(c) * config.width, ks, alpha)


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class StabilityReport:
    verdict: str
    intervals: Intervals
    k: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    alpha_max: float = 0.0
    alpha_in_K: float = 0.0
    k_in_K: float = float("nan")
    slope: GrowthFit | None = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "K": self.intervals.to_dict(),
            "alpha_max": self.alpha_max,
            "alpha_in_K": self.alpha_in_K,
            "k_in_K": self.k_in_K,
            "slope": None if self.slope is None else {"c": self.slope.c, "d": self.slope.d, "c_width": self.slope.c_width},
            "diagnostics": self.diagnostics,
        }


def _probe_points(intervals: Intervals, per: int = 24) -> np.ndarray:
    pts = []
    for a, b in intervals.union:
        lo = max(a, b * 1e-6)
        pts.append(np.geomspace(lo, b, per + 2)[1:-1])
    return np.concatenate(pts) if pts else np.zeros(0)


def classify(config: ValidatedConfig, kgrid=None, tol: float = STABLE_TOL) -> StabilityReport:
    """Stability verdict from the flow predicate, corroborated by spectra.

    Raises :class:`InconsistentEvidence` if the flows vanish but some
    sampled abscissa exceeds ``10 tol``.
    """
    ks = default_kgrid() if kgrid is None else np.asarray(kgrid, dtype=float)
    alpha = abscissa(config, ks)
    amax = float(alpha.max())
    K = pd_intervals(config, np.abs(ks))
    diag: dict = {"tol": tol}
    if not config.has_flow:
        if amax > 10 * tol:
            j = int(alpha.argmax())
            raise InconsistentEvidence(
                f"zero flow but spectral abscissa {amax:.3e} exceeds {10 * tol:g}", k=float(ks[j])
            )
        if not K.empty:
            raise InconsistentEvidence(f"zero flow but the discriminant holds on {K.union}")
        if amax > tol:
            diag["warning"] = f"abscissa {amax:.3e} above tol within the 10x allowance"
        return StabilityReport("stable", K, ks, alpha, amax, 0.0, float("nan"), None, diag)

    probes = _probe_points(K)
    aK = abscissa(config, probes) if probes.size else np.zeros(0)
    a_in = float(aK.max()) if aK.size else 0.0
    k_in = float(probes[aK.argmax()]) if aK.size else float("nan")
    bad = probes[aK <= 0.0] if aK.size else probes
    diag["containment_violations"] = [float(k) for k in bad]
    diag["corroborated"] = bool(a_in >= UNSTABLE_TOL or amax >= UNSTABLE_TOL)
    if K.empty:
        diag["warning"] = "flows present but discriminant intervals empty on the grid"
    try:
        slope = growth_slope(config)
    except FlatSpectrum:
        slope = None
    return StabilityReport("unstable", K, ks, alpha, max(amax, a_in), a_in, k_in, slope, diag)


# ---------------------------------------------------------------------------
# Green's function


@dataclass(frozen=True)
class Quadrature:
    """Controls for the oscillatory ``k`` integral.

    Attributes
    ----------
    kmax : float
        Initial truncation; doubled at each refinement level.
    dk : float, optional
        Initial node spacing; by default half a radian of phase per node at
        the largest requested ``t``.  Halved at each level.
    rtol : float
        Stop when the metric block changes by less than this between levels.
    """

    kmax: float = 8.0
    dk: float | None = None
    rtol: float = 1e-4
    max_levels: int = 4
    node_budget: int = 4_000_000
    pade_below: float = 1.0
    cond_limit: float = 1e4
    chunk: int = 65536


@dataclass(frozen=True)
class GreensSample:
    V: float
    t: float
    G: np.ndarray
    norm: float
    full_norm: float
    kmax: float
    nodes: int
    error_estimate: float
    levels: int

    @property
    def blocks(self) -> dict:
        n = self.G.shape[0] // 2
        return {"UL": self.G[:n, :n], "UR": self.G[:n, n:], "LL": self.G[n:, :n], "LR": self.G[n:, n:]}


def _shifted_stack(config, ks, V):
    stack = build_generator_batch(config, ks)
    if V:
        stack = stack + (1j * V * ks)[:, None, None] * np.eye(2 * config.n)
    return stack


def _matched_eig(config, k, V, h):
    """Eigenpairs at ``k`` with ``d lambda / dk`` by central differences."""
    S = _shifted_stack(config, np.array([k - h, k, k + h]), V)
    lam, vec = np.linalg.eig(S)
    order = [np.argmin(np.abs(lam[0][:, None] - lam[1][None, :]), axis=0),
             np.argmin(np.abs(lam[2][:, None] - lam[1][None, :]), axis=0)]
    dlam = (lam[2][order[1]] - lam[0][order[0]]) / (2 * h)
    return lam[1], vec[1], np.linalg.inv(vec[1]), dlam


def _endpoint_terms(config, K, V, times, dk):
    """Tail integrals beyond ``+-K`` by one integration by parts, plus the
    Euler-Maclaurin slope correction of the trapezoid rule at ``+-K``."""
    h = 1e-5 * max(K, 1.0)
    out = []
    ends = [(s,) + _matched_eig(config, s * K, V, h) for s in (1.0, -1.0)]
    for t in times:
        total = 0.0
        for s, lam, Vm, Vi, dlam in ends:
            e = np.exp(t * lam)
            tail = Vm @ np.diag(e / (t * dlam)) @ Vi  # int_K^inf ~ -tail, int_-inf^-K ~ +tail
            slope = Vm @ np.diag(t * dlam * e) @ Vi
            total = total - s * tail - s * dk**2 / 12.0 * slope
        out.append(total)
    return np.array(out)


def _phase_rate(config, K, V):
    lam, _, _, dlam = _matched_eig(config, K, V, 1e-5 * max(K, 1.0))
    return float(np.abs(dlam).max())


def _integrate(config, V, times, K, dk, q: Quadrature):
    n2 = 2 * config.n
    N = 2 * int(math.ceil(K / dk)) + 1
    if N > q.node_budget:
        raise NonConvergentQuadrature(f"{N} nodes exceed the budget of {q.node_budget}")
    ks = np.linspace(-K, K, N)
    step = ks[1] - ks[0]
    w = np.full(N, step)
    w[[0, -1]] *= 0.5
    acc = np.zeros((len(times), n2, n2), dtype=complex)
    for lo in range(0, N, q.chunk):
        kc, wc = ks[lo : lo + q.chunk], w[lo : lo + q.chunk]
        S = _shifted_stack(config, kc, V)
        use_eig = np.abs(kc) >= q.pade_below
        if use_eig.any():
            lam, vec = np.linalg.eig(S[use_eig])
            cond = np.linalg.cond(vec)
            good = cond < q.cond_limit
            idx = np.flatnonzero(use_eig)
            use_eig[idx[~good]] = False
            lam, vec = lam[good], vec[good]
            inv = np.linalg.inv(vec)
            we = wc[use_eig]
        pade = ~use_eig
        for it, t in enumerate(times):
            if use_eig.any():
                coef = we[:, None] * np.exp(t * lam)
                acc[it] += np.einsum("nij,nj,njk->ik", vec, coef, inv)
            if pade.any():
                acc[it] += np.einsum("n,nij->ij", wc[pade], expm_batch(t * S[pade]))
    acc += _endpoint_terms(config, K, V, times, step)
    return acc / (2 * np.pi), N


def greens_series(
    config: ValidatedConfig, V: float, times, quadrature: Quadrature = Quadrature()
) -> list[GreensSample]:
    """``G(x = V t, t)`` at several times sharing one set of nodes per level.

    The decay metric is the Frobenius norm of the amplitude-to-amplitude
    block; its relative change between successive refinements (``kmax`` and
    node density both doubled) must fall below ``rtol``.
    """
    times = [float(t) for t in times]
    if min(times) <= 0:
        raise ValueError("times must be positive")
    q = quadrature
    n = config.n
    K = q.kmax
    dk = q.dk or 0.5 / (max(times) * (_phase_rate(config, K, V) + 1e-12))
    prev = None
    for level in range(q.max_levels):
        G, N = _integrate(config, V, times, K, dk, q)
        if prev is not None:
            ul, ulp = G[:, :n, :n], prev[:, :n, :n]
            err = np.linalg.norm(ul - ulp, axis=(1, 2)) / np.maximum(np.linalg.norm(ul, axis=(1, 2)), 1e-300)
            if np.all(err < q.rtol):
                return [
                    GreensSample(
                        V, t, G[i], float(np.linalg.norm(G[i, :n, :n])), float(np.linalg.norm(G[i])),
                        K, N, float(err[i]), level + 1,
                    )
                    for i, t in enumerate(times)
                ]
        prev = G
        K, dk = 2 * K, dk / 2
    raise NonConvergentQuadrature(
        f"Green's function did not settle to rtol {q.rtol:g} after {q.max_levels} levels", t=max(times)
    )


def greens_function(config: ValidatedConfig, V: float, t: float, quadrature: Quadrature = Quadrature()) -> GreensSample:
    """``G(x, t) = (1/2 pi) int exp(t (ikV + M(k))) dk`` at ``x = V t``."""
    return greens_series(config, V, [t], quadrature)[0]


def decay_exponent(samples: list[GreensSample]) -> float:
    """Slope of ``log ||G||`` against ``log t``."""
    t = np.array([s.t for s in samples])
    g = np.array([s.norm for s in samples])
    return float(np.polyfit(np.log(t), np.log(g), 1)[0])
