"""epsilon-pseudospectra of ``M(k)`` from the field ``sigma_min(M - lambda I)``.

``lambda`` lies in the epsilon-pseudospectrum when the resolvent norm
exceeds ``1/epsilon``, i.e. when ``sigma_min(M - lambda I) < epsilon``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage.measure import find_contours

from .channel_model import ValidatedConfig
from .errors import LevelOutOfRange
from .linalg_kernels import smallest_singular_values
from .spectral_matrices import build_generator

DEFAULT_RESOLUTION = 201
FIGURE_LEVELS = (1e-1, 10**-1.5, 1e-2, 10**-2.5)
FIGURE_KS = (1.0, 0.5, 0.1, 0.01)


@dataclass(frozen=True)
class PseudoGrid:
    """``sigma_min`` sampled on a rectangle; ``field[i, j]`` sits at ``(re[j], im[i])``."""

    k: float
    re: np.ndarray
    im: np.ndarray
    field: np.ndarray
    eigenvalues: np.ndarray

    @property
    def spacing(self) -> tuple[float, float]:
        return float(self.re[1] - self.re[0]), float(self.im[1] - self.im[0])

    def rows(self):
        yield ["re", "im", "sigma_min"]
        for i, y in enumerate(self.im):
            for j, x in enumerate(self.re):
                yield [f"{x:.16e}", f"{y:.16e}", f"{self.field[i, j]:.16e}"]


def sigma_field(M: np.ndarray, re: np.ndarray, im: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """``sigma_min(M - z I)`` for every ``z = re + i im`` on the tensor grid."""
    Z = (re[None, :] + 1j * im[:, None]).ravel()
    eye = np.eye(M.shape[0])
    out = np.empty(Z.size)
    for lo in range(0, Z.size, chunk):
        z = Z[lo : lo + chunk]
        out[lo : lo + z.size] = smallest_singular_values(M[None] - z[:, None, None] * eye)
    return out.reshape(im.size, re.size)


def _boundary_min(field: np.ndarray) -> float:
    return float(min(field[0].min(), field[-1].min(), field[:, 0].min(), field[:, -1].min()))


def auto_window(lam: np.ndarray, margin: float) -> tuple[float, float, float, float]:
    """Eigenvalue bounding box inflated by ``margin`` on every side."""
    return (
        lam.real.min() - margin,
        lam.real.max() + margin,
        lam.imag.min() - margin,
        lam.imag.max() + margin,
    )


def grid_for_matrix(
    M: np.ndarray,
    k: float = float("nan"),
    window=None,
    resolution: int = DEFAULT_RESOLUTION,
    levels=FIGURE_LEVELS,
    max_expand: int = 8,
) -> PseudoGrid:
    """Pseudospectral grid for an arbitrary square matrix.

    Without a window the eigenvalue box is inflated by ``3 max(levels)``;
    when the sublevel set at ``max(levels)`` still touches the edge, the
    margin is doubled (up to ``max_expand`` times) so sets are not clipped.
    """
    M = np.asarray(M, dtype=complex)
    lam = np.linalg.eigvals(M)
    eps = max(levels)
    margin = 3.0 * eps
    for _ in range(max_expand + 1):
        box = window or auto_window(lam, margin)
        re = np.linspace(box[0], box[1], resolution)
        im = np.linspace(box[2], box[3], resolution)
        field = sigma_field(M, re, im)
        if window is not None or _boundary_min(field) > eps:
            break
        margin *= 2.0
    return PseudoGrid(float(k), re, im, field, lam)


def compute_grid(
    config: ValidatedConfig,
    k: float,
    window=None,
    resolution: int = DEFAULT_RESOLUTION,
    levels=FIGURE_LEVELS,
) -> PseudoGrid:
    """``sigma_min(M(k) - lambda I)`` on a ``resolution``-square grid."""
    return grid_for_matrix(build_generator(config, k).M, k, window, resolution, levels)


def _check_level(grid: PseudoGrid, eps: float) -> None:
    lo, hi = float(grid.field.min()), float(grid.field.max())
    if not (eps > 0 and lo <= eps <= hi):
        raise LevelOutOfRange(f"level {eps:g} outside the field range [{lo:.3e}, {hi:.3e}]")


def extract_contours(grid: PseudoGrid, levels) -> dict[float, list[np.ndarray]]:
    """Level curves ``sigma_min = eps`` as complex polylines.

    A constant field has no level curves and yields empty lists.
    """
    out: dict[float, list[np.ndarray]] = {}
    constant = np.ptp(grid.field) == 0.0
    for eps in levels:
        eps = float(eps)
        if constant:
            out[eps] = []
            continue
        _check_level(grid, eps)
        curves = []
        for c in find_contours(grid.field, eps):
            rows, cols = c[:, 0], c[:, 1]
            x = np.interp(cols, np.arange(grid.re.size), grid.re)
            y = np.interp(rows, np.arange(grid.im.size), grid.im)
            curves.append(x + 1j * y)
        out[eps] = curves
    return out


def width_at(grid: PseudoGrid, eps: float) -> float:
    """Real-axis extent of the sampled sublevel set ``sigma_min < eps``."""
    _check_level(grid, eps)
    cols = np.flatnonzero((grid.field < eps).any(axis=0))
    if cols.size == 0:
        return 0.0
    dx = grid.spacing[0]
    return float(grid.re[cols[-1]] - grid.re[cols[0]] + dx)


def width_table(config: ValidatedConfig, ks=FIGURE_KS, levels=FIGURE_LEVELS, resolution: int = DEFAULT_RESOLUTION):
    """``width_at(eps) / eps`` for each ``k`` (rows) and level (columns)."""
    table = np.empty((len(ks), len(levels)))
    for i, k in enumerate(ks):
        g = compute_grid(config, k, resolution=resolution, levels=levels)
        table[i] = [width_at(g, e) / e for e in levels]
    return table


def contours_to_json(contours: dict[float, list[np.ndarray]], k: float, path) -> Path:
    doc = {
        "k": k,
        "levels": [
            {"epsilon": eps, "polylines": [[[float(z.real), float(z.imag)] for z in c] for c in curves]}
            for eps, curves in contours.items()
        ],
    }
    path = Path(path)
    path.write_text(json.dumps(doc) + "\n", encoding="utf-8")
    return path
