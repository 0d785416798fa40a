"""Dense kernels for the small complex generators (order 2n <= 64).

Eigenvalues and singular values come from LAPACK through numpy; the matrix
exponential is a batched scaling-and-squaring with the [13/13] Padé
approximant (Higham, 2005).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DefectiveMatrix, NoConvergence, Overflow

RESIDUAL_TOL = 1e-9
DEFECTIVE_TOL = 1e-8

# [13/13] Padé coefficients and the 1-norm bound below which it is accurate
_PADE13 = np.array(
    [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ]
)
_THETA13 = 5.371920351148152


@dataclass(frozen=True)
class SpectrumSample:
    k: float
    eigenvalues: np.ndarray
    abscissa: float
    eigenvectors: np.ndarray | None = None

    @property
    def real_sum(self) -> float:
        return float(self.eigenvalues.real.sum())


def _matrix_tag(M: np.ndarray) -> str:
    return hashlib.sha1(np.ascontiguousarray(M).tobytes()).hexdigest()[:12]


def sort_spectrum(lam: np.ndarray, scale: float = 1.0) -> np.ndarray:
    """Order by real part, then imaginary part.

    Real parts are compared after rounding to ``1e-12 * scale`` so that
    rounding noise on a purely imaginary spectrum does not shuffle it.
    """
    q = np.round(lam.real / (1e-12 * max(scale, 1e-300)))
    return np.lexsort((lam.imag, q))


def eigenvalues(M: np.ndarray, k: float = float("nan"), vectors: bool = False) -> SpectrumSample:
    """All eigenvalues of ``M`` in deterministic order.

    Raises :class:`NoConvergence` if LAPACK fails or an eigenpair residual
    exceeds ``1e-9 ||M||``.
    """
    M = np.asarray(M, dtype=complex)
    if not np.all(np.isfinite(M)):
        raise NoConvergence(f"non-finite entries in matrix {_matrix_tag(M)}", k=k)
    try:
        lam, V = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(f"eigensolver failed on matrix {_matrix_tag(M)}: {exc}", k=k) from None
    scale = np.linalg.norm(M, 2)
    tol = RESIDUAL_TOL * max(scale, 1.0)
    res = np.linalg.norm(M @ V - V * lam, axis=0)
    eye = np.eye(M.shape[0])
    for j in np.flatnonzero(res > tol):
        # balancing can spoil single vectors of badly scaled input; take the null vector instead
        V[:, j] = np.linalg.svd(M - lam[j] * eye)[2][-1].conj()
    resid = np.linalg.norm(M @ V - V * lam, axis=0).max(initial=0.0)
    if resid > tol:
        raise NoConvergence(
            f"eigenpair residual {resid:.3e} exceeds {RESIDUAL_TOL:g}||M|| for matrix {_matrix_tag(M)}",
            k=k,
        )
    order = sort_spectrum(lam, scale)
    lam = lam[order]
    return SpectrumSample(
        k=k,
        eigenvalues=lam,
        abscissa=float(lam.real.max()),
        eigenvectors=V[:, order] if vectors else None,
    )


def spectral_abscissa(M: np.ndarray) -> float:
    return float(np.linalg.eigvals(M).real.max())


# ---------------------------------------------------------------------------
# matrix exponential


def _pade13(A: np.ndarray) -> np.ndarray:
    b = _PADE13
    ident = np.broadcast_to(np.eye(A.shape[-1], dtype=A.dtype), A.shape)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident
    return np.linalg.solve(V - U, V + U)


def expm_batch(A: np.ndarray) -> np.ndarray:
    """``exp(A)`` for a stack of square matrices, shape ``(..., m, m)``.

    Each matrix gets its own number of squarings ``s`` with
    ``||A / 2^s||_1 <= theta_13``.
    """
    A = np.asarray(A)
    if not np.iscomplexobj(A):
        A = A.astype(float)
    shape = A.shape
    flat = A.reshape((-1,) + shape[-2:])
    norms = np.abs(flat).sum(axis=-2).max(axis=-1)
    with np.errstate(divide="ignore"):
        s = np.where(norms > _THETA13, np.ceil(np.log2(norms / _THETA13)), 0.0).astype(int)
    scaled = flat / (2.0 ** s)[:, None, None]
    F = _pade13(scaled)
    for step in range(int(s.max(initial=0))):
        todo = s > step
        F[todo] = F[todo] @ F[todo]
    return F.reshape(shape)


def matrix_exponential(M: np.ndarray, t: float = 1.0, k: float | None = None) -> np.ndarray:
    """``exp(t M)`` by scaling and squaring with the [13/13] Padé approximant."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    M = np.asarray(M)
    if t == 0:
        return np.eye(M.shape[-1], dtype=np.result_type(M, float))
    with np.errstate(over="ignore", invalid="ignore"):
        E = expm_batch(t * M)
    if not np.all(np.isfinite(E)):
        raise Overflow("exp(tM) exceeds the floating-point range", k=k, t=t)
    return E


# ---------------------------------------------------------------------------
# singular values and conditioning


def smallest_singular_value(M: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(M), compute_uv=False)[..., -1])


def smallest_singular_values(stack: np.ndarray) -> np.ndarray:
    """``sigma_min`` for every matrix in a stack ``(..., m, m)``."""
    return np.linalg.svd(stack, compute_uv=False)[..., -1]


def min_eigen_gap(lam: np.ndarray) -> float:
    if lam.size < 2:
        return np.inf
    d = np.abs(lam[:, None] - lam[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def eigvec_condition(M: np.ndarray, k: float | None = None) -> float:
    """``||V|| ||V^-1||`` in the 2-norm, with unit-length eigenvector columns.

    Raises :class:`DefectiveMatrix` when two eigenvalues are closer than
    ``1e-8 ||M||``.
    """
    M = np.asarray(M, dtype=complex)
    lam, V = np.linalg.eig(M)
    scale = np.linalg.norm(M, 2)
    gap = min_eigen_gap(lam)
    if gap < DEFECTIVE_TOL * scale:
        raise DefectiveMatrix(f"eigenvalue spacing {gap:.3e} below {DEFECTIVE_TOL:g}||M||", k=k)
    return float(np.linalg.cond(V, 2))


def eigenvectors_normalized(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lam, V = np.linalg.eig(np.asarray(M, dtype=complex))
    return lam, V / np.linalg.norm(V, axis=0)


# ---------------------------------------------------------------------------
# branch tracking


def track_branches(spectra: list[np.ndarray], jump_factor: float = 10.0) -> tuple[np.ndarray, np.ndarray]:
    """Reorder consecutive spectra so each column follows one eigenvalue branch.

    Matching between neighbouring samples minimises the total distance.
    Returns ``(branches, crossings)``; ``crossings[j]`` is True where some
    branch jumped by more than ``jump_factor`` times the local spacing.
    """
    out = np.array([np.asarray(s) for s in spectra], dtype=complex)
    crossings = np.zeros(len(out), dtype=bool)
    for j in range(1, len(out)):
        prev, cur = out[j - 1], out[j]
        cost = np.abs(prev[:, None] - cur[None, :])
        rows, cols = linear_sum_assignment(cost)
        out[j] = cur[cols[np.argsort(rows)]]
        jumps = np.abs(out[j] - prev)
        spacing = min_eigen_gap(prev)
        if np.isfinite(spacing) and spacing > 0 and jumps.max() > jump_factor * spacing:
            crossings[j] = True
    return out, crossings
