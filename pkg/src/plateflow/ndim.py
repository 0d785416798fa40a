"""Plates in ``m + 1`` dimensions: horizontal wavevectors ``k`` in ``R^m``.

The tridiagonal matrices ``P``, ``Q``, ``R`` depend on ``k`` only through
``|k|`` and the projections ``k . U_i``; for ``m = 1`` they reduce to
``A``, ``k B`` and ``C``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm, qmc

from .channel_model import ChannelConfig, ValidatedConfig, validate
from .errors import InconsistentEvidence, WrongFlowCount, ZeroWavevector
from .spectral_matrices import (
    GeneratorMatrix,
    TriSym,
    assemble,
    coth_csch,
    xcoth_xcsch,
)
from .stability import STABLE_TOL, StabilityReport, default_kgrid, pd_intervals


@dataclass(frozen=True)
class NdChannelConfig:
    """Channel geometry with an ``m``-vector mean flow in every gap."""

    m: int
    base: ValidatedConfig
    flows: np.ndarray

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def gaps(self) -> np.ndarray:
        return self.base.gaps

    @property
    def has_flow(self) -> bool:
        return bool(np.any(self.flows != 0.0))

    def along(self, direction) -> ValidatedConfig:
        """Planar config seen by wavevectors parallel to ``direction``."""
        d = np.asarray(direction, dtype=float)
        d = d / np.linalg.norm(d)
        return self.base.with_flows(self.flows @ d)


def nd_config(heights, flows) -> NdChannelConfig:
    """Validate heights as in the planar case and flows as ``(n+1, m)`` vectors."""
    F = np.atleast_2d(np.asarray(flows, dtype=float))
    if F.ndim != 2 or F.shape[1] < 1:
        raise WrongFlowCount("flows must be a list of m-vectors")
    base = validate(ChannelConfig(tuple(heights), tuple(np.zeros(F.shape[0]))))
    F = F.copy()
    F.setflags(write=False)
    return NdChannelConfig(F.shape[1], base, F)


@dataclass(frozen=True)
class NdSpectralMatrices:
    k: np.ndarray
    P: TriSym
    Q: TriSym
    R: TriSym


def _kvec(config: NdChannelConfig, k) -> np.ndarray:
    k = np.asarray(k, dtype=float).reshape(-1)
    if k.size != config.m:
        raise ValueError(f"wavevector needs {config.m} components, got {k.size}")
    return k


def build_ndim(config: NdChannelConfig, k) -> NdSpectralMatrices:
    """Closed-form ``P(k)``, ``Q(k)``, ``R(k)`` for ``k != 0``."""
    k = _kvec(config, k)
    r = float(np.linalg.norm(k))
    if r == 0.0:
        raise ZeroWavevector("P(k) has a pole at k = 0; use ndim_generator", k=tuple(k))
    coth, csch = coth_csch(r * config.gaps)
    p = config.flows @ k  # k . U_i
    P = TriSym((r + coth[:-1] + coth[1:]) / r, -csch[1:-1] / r)
    Q = TriSym((p[:-1] ** 2 * coth[:-1] + p[1:] ** 2 * coth[1:]) / r, -(p[1:-1] ** 2) * csch[1:-1] / r)
    R = TriSym((p[:-1] * coth[:-1] + p[1:] * coth[1:]) / r, -p[1:-1] * csch[1:-1] / r)
    return NdSpectralMatrices(k, P, Q, R)


def ndim_generator(config: NdChannelConfig, k) -> GeneratorMatrix:
    """``N(k) = [[0, I], [P^-1 (Q - |k|^4 I), -2i P^-1 R]]``, including ``k = 0``.

    Solves against ``|k|^2 P``, whose entries are analytic in ``|k|`` and
    use the small-argument series near zero.
    """
    k = _kvec(config, k)
    r = float(np.linalg.norm(k))
    n = config.n
    g = config.gaps
    xc, xs = xcoth_xcsch(r * g)
    rc, rs = xc / g, xs / g  # r coth(r g), r csch(r g)
    p = config.flows @ k
    Pt = TriSym(r * r + rc[:-1] + rc[1:], -rs[1:-1])  # r^2 P
    Qt = TriSym(p[:-1] ** 2 * rc[:-1] + p[1:] ** 2 * rc[1:], -(p[1:-1] ** 2) * rs[1:-1])  # r^2 Q
    Rt = TriSym(p[:-1] * rc[:-1] + p[1:] * rc[1:], -p[1:-1] * rs[1:-1])  # r^2 R
    lower_left = Pt.solve(Qt.dense() - r**6 * np.eye(n))
    lower_right = -2j * Pt.solve(Rt.dense())
    return GeneratorMatrix(r, assemble(n, lower_left, lower_right))


def sphere_directions(m: int, count: int = 32, seed: int = 0) -> np.ndarray:
    """Unit vectors: the coordinate axes plus a scrambled Halton set on the sphere."""
    axes = np.eye(m)
    if m == 1:
        return axes
    u = qmc.Halton(d=m, scramble=True, seed=seed).random(count)
    v = norm.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.vstack([axes, v])


def ndim_abscissa(config: NdChannelConfig, direction, radii) -> np.ndarray:
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    return np.array([np.linalg.eigvals(ndim_generator(config, r * d).M).real.max() for r in radii])


def ndim_classify(
    config: NdChannelConfig,
    directions=None,
    radii=None,
    tol: float = STABLE_TOL,
) -> StabilityReport:
    """Zero-flow predicate corroborated by spectra over directions and radii.

    ``alpha`` in the report is the maximum over directions at each radius;
    ``diagnostics["direction_max"]`` keeps the per-direction maxima.
    """
    dirs = sphere_directions(config.m) if directions is None else np.atleast_2d(np.asarray(directions, dtype=float))
    rs = default_kgrid()[1:] if radii is None else np.asarray(radii, dtype=float)
    A = np.array([ndim_abscissa(config, d, rs) for d in dirs])
    per_dir = A.max(axis=1)
    best = int(per_dir.argmax())
    amax = float(per_dir[best])
    diag = {"tol": tol, "directions": dirs.tolist(), "direction_max": per_dir.tolist()}
    K = pd_intervals(config.along(dirs[best]), rs)
    if not config.has_flow:
        if amax > 10 * tol:
            raise InconsistentEvidence(f"zero flow but abscissa {amax:.3e} along {dirs[best].tolist()}")
        return StabilityReport("stable", K, rs, A.max(axis=0), amax, 0.0, float("nan"), None, diag)
    diag["best_direction"] = dirs[best].tolist()
    return StabilityReport("unstable", K, rs, A.max(axis=0), amax, amax, float(rs[A[best].argmax()]), None, diag)
