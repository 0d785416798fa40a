"""Linear Cauchy problem on the line: FFT, per-mode ``exp(t M(k))``, inverse FFT.

The analysis transform is ``f^(k) = int exp(-ikx) f(x) dx``.  On the grid
``x_j = -L + j dx`` it is approximated by ``dx (-1)^m fft(f)[m]`` with
``k_m = pi m / L``; the synthesis is the exact discrete inverse.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .channel_model import InitialData, ValidatedConfig
from .errors import AliasedData, ConfigError, Overflow, RealityViolation
from .linalg_kernels import expm_batch
from .spectral_matrices import build_generator_batch

log = logging.getLogger(__name__)

DEFAULT_L = 40.0
DEFAULT_N = 1024
ALIAS_TOL = 1e-8
REALITY_TOL = 1e-9
SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class SimGrid:
    """Uniform periodic grid on ``[-L, L)`` with ``N`` nodes (a power of two)."""

    L: float = DEFAULT_L
    N: int = DEFAULT_N

    def __post_init__(self):
        if not self.L > 0:
            raise ConfigError(f"half-width must be positive, got {self.L}")
        if self.N < 2 or self.N & (self.N - 1):
            raise ConfigError(f"point count must be a power of two, got {self.N}")

    @property
    def dx(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.dx * np.arange(self.N)

    @property
    def k(self) -> np.ndarray:
        """Wavenumbers in standard DFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.N, d=self.dx)

    @property
    def nyquist(self) -> float:
        return np.pi * self.N / (2.0 * self.L)

    @property
    def sign(self) -> np.ndarray:
        # exp(-i k_m x_0) = (-1)^m because k_m L = pi m
        return np.where(np.arange(self.N) % 2, -1.0, 1.0)

    @property
    def partner(self) -> np.ndarray:
        """Index of ``-k`` for every mode (Nyquist and zero pair with themselves)."""
        return (-np.arange(self.N)) % self.N

    def to_dict(self) -> dict:
        return {"L": self.L, "N": self.N}


@dataclass(frozen=True)
class SpectralState:
    """Per-mode state ``(eta^_1..eta^_n, d_t eta^_1..d_t eta^_n)``.

    ``data`` has shape ``(N, 2n)`` with rows in DFT order of ``grid.k``.
    """

    grid: SimGrid
    data: np.ndarray
    t: float = 0.0

    @property
    def n(self) -> int:
        return self.data.shape[1] // 2

    def asymmetry(self) -> float:
        """``max |s(-k) - conj s(k)|`` relative to the largest entry."""
        peak = np.abs(self.data).max(initial=0.0)
        if peak == 0.0:
            return 0.0
        return float(np.abs(self.data[self.grid.partner] - self.data.conj()).max() / peak)


@dataclass(frozen=True)
class SpatialField:
    t: float
    x: np.ndarray
    eta: np.ndarray
    eta_t: np.ndarray
    residue: float = 0.0

    @property
    def max_amplitude(self) -> float:
        return float(np.abs(self.eta).max(initial=0.0))


def _analysis(f: np.ndarray, grid: SimGrid) -> np.ndarray:
    return grid.dx * grid.sign * np.fft.fft(f, axis=-1)


def _synthesis(fh: np.ndarray, grid: SimGrid) -> np.ndarray:
    return np.fft.ifft(fh * grid.sign, axis=-1) / grid.dx


def symmetrize(data: np.ndarray, grid: SimGrid) -> np.ndarray:
    """Project onto states with ``s(-k) = conj s(k)``."""
    return 0.5 * (data + data[grid.partner].conj())


def transform_initial(data: InitialData, grid: SimGrid = SimGrid()) -> SpectralState:
    """Fourier transform of the initial plate data.

    Raises :class:`AliasedData` when the spectrum at the Nyquist wavenumber
    exceeds ``1e-8`` of its peak.
    """
    eta, eta_t = data.sample(grid.x)
    fh = _analysis(np.concatenate([eta, eta_t]), grid)
    peak = np.abs(fh).max(initial=0.0)
    if peak > 0:
        nyq = np.abs(fh[:, grid.N // 2]).max()
        if nyq > ALIAS_TOL * peak:
            raise AliasedData(
                f"spectrum at the Nyquist wavenumber is {nyq / peak:.3e} of its peak; refine the grid",
                k=grid.nyquist,
            )
    return SpectralState(grid, symmetrize(fh.T, grid))


def generator_stack(config: ValidatedConfig, k: Iterable[float]) -> np.ndarray:
    return build_generator_batch(config, np.fromiter(k, dtype=float))


def propagators(config: ValidatedConfig, k: np.ndarray, t: float, stack: np.ndarray | None = None) -> np.ndarray:
    """``exp(t M(k_j))`` for every wavenumber; raises :class:`Overflow` naming ``k``."""
    if stack is None:
        stack = generator_stack(config, k)
    with np.errstate(over="ignore", invalid="ignore"):
        E = expm_batch(t * stack)
    bad = ~np.isfinite(E).all(axis=(1, 2))
    if bad.any():
        j = int(np.flatnonzero(bad)[0])
        raise Overflow("exp(tM) overflowed", k=float(k[j]), t=t)
    return E


def evolve(config: ValidatedConfig, state: SpectralState, t: float, stack: np.ndarray | None = None) -> SpectralState:
    """Advance every mode by ``exp(t M(k))`` and restore conjugate symmetry."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    if state.n != config.n:
        raise ConfigError(f"state has {state.n} plates, config has {config.n}")
    if t == 0:
        return SpectralState(state.grid, state.data.copy(), state.t)
    E = propagators(config, state.grid.k, t, stack)
    out = np.einsum("kij,kj->ki", E, state.data)
    return SpectralState(state.grid, symmetrize(out, state.grid), state.t + t)


def synthesize(state: SpectralState) -> SpatialField:
    """Inverse transform to real plate amplitudes and velocities."""
    grid = state.grid
    asym = state.asymmetry()
    if asym > SYMMETRY_TOL:
        raise RealityViolation(f"state violates conjugate symmetry by {asym:.3e}", t=state.t)
    f = _synthesis(state.data.T, grid)
    peak = np.abs(f.real).max(initial=0.0)
    residue = float(np.abs(f.imag).max(initial=0.0))
    if residue > REALITY_TOL * max(peak, np.finfo(float).tiny):
        raise RealityViolation(f"imaginary residue {residue:.3e} against field max {peak:.3e}", t=state.t)
    log.debug("t=%g: discarded imaginary residue %.3e", state.t, residue)
    n = state.n
    return SpatialField(state.t, grid.x, f.real[:n], f.real[n:], residue)


def simulate(
    config: ValidatedConfig,
    data: InitialData,
    times: Sequence[float],
    grid: SimGrid = SimGrid(),
) -> list[SpatialField]:
    """Fields at each requested time, each propagated exactly from ``t = 0``."""
    s0 = transform_initial(data, grid)
    stack = generator_stack(config, grid.k)
    return [synthesize(evolve(config, s0, float(t), stack)) for t in times]


# ---------------------------------------------------------------------------
# periodic channel, integer wavenumbers


def simulate_periodic(
    config: ValidatedConfig,
    coefficients: dict[int, np.ndarray],
    times: Sequence[float],
    points: int = 128,
) -> list[SpatialField]:
    """Evolve a finite Fourier series on ``[0, 2 pi)``.

    ``coefficients[k]`` is the complex ``2n`` vector multiplying
    ``exp(ikx)``.  A missing ``-k`` entry is filled with the conjugate of
    ``k`` so the field is real.
    """
    n = config.n
    coef = {int(k): np.asarray(v, dtype=complex).reshape(2 * n) for k, v in coefficients.items()}
    for k in list(coef):
        coef.setdefault(-k, coef[k].conj())
    ks = np.array(sorted(coef), dtype=float)
    C = np.array([coef[int(k)] for k in ks]) if ks.size else np.zeros((0, 2 * n))
    x = 2.0 * np.pi * np.arange(points) / points
    waves = np.exp(1j * np.outer(ks, x))
    stack = generator_stack(config, ks) if ks.size else np.zeros((0, 2 * n, 2 * n))
    out = []
    for t in times:
        E = propagators(config, ks, float(t), stack) if ks.size else stack
        ct = np.einsum("kij,kj->ki", E, C)
        f = ct.T @ waves if ks.size else np.zeros((2 * n, points), dtype=complex)
        peak = np.abs(f.real).max(initial=0.0)
        residue = float(np.abs(f.imag).max(initial=0.0))
        if residue > REALITY_TOL * max(peak, np.finfo(float).tiny):
            raise RealityViolation(f"imaginary residue {residue:.3e} in periodic synthesis", t=float(t))
        out.append(SpatialField(float(t), x, f.real[:n], f.real[n:], residue))
    return out


# ---------------------------------------------------------------------------
# export


def field_rows(fld: SpatialField) -> Iterable[list[str]]:
    n = fld.eta.shape[0]
    yield ["x"] + [f"eta{i}" for i in range(1, n + 1)] + [f"eta_t{i}" for i in range(1, n + 1)]
    for j, xj in enumerate(fld.x):
        vals = [xj, *fld.eta[:, j], *fld.eta_t[:, j]]
        yield [f"{v:.16e}" for v in vals]


def write_field_csv(fld: SpatialField, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(field_rows(fld))
    return path


def provenance(config: ValidatedConfig, grid: SimGrid, data: InitialData, times: Sequence[float]) -> str:
    doc = {
        "config": config.to_dict(),
        "grid": grid.to_dict(),
        "initial": data.metadata(),
        "times": [float(t) for t in times],
        "version": __version__,
    }
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def export_fields(
    fields: Sequence[SpatialField],
    outdir,
    config: ValidatedConfig,
    grid: SimGrid,
    data: InitialData,
) -> list[Path]:
    """One CSV per time plus ``fields.json`` describing the run."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = [write_field_csv(f, outdir / f"field_t{f.t:g}.csv") for f in fields]
    times = [f.t for f in fields]
    sidecar = {
        "config": config.to_dict(),
        "grid": grid.to_dict(),
        "initial": data.metadata(),
        "times": times,
        "max_amplitude": [f.max_amplitude for f in fields],
        "provenance": provenance(config, grid, data, times),
        "files": [p.name for p in paths],
    }
    side = outdir / "fields.json"
    side.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths + [side]
