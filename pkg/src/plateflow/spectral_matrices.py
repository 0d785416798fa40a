"""Tridiagonal coefficient matrices and the per-wavenumber generator.

For a Fourier mode ``exp(ikx)`` the plate amplitudes ``phi`` and velocities
``pi`` obey ``A d(pi)/dt = (k B - k^4 I) phi - 2i C pi`` with ``d(phi)/dt = pi``,
where ``A``, ``B``, ``C`` are real symmetric tridiagonal matrices built from
``coth`` and ``csch`` of ``k * gap``.  The generator is

    M(k) = [[0, I], [A^{-1}(k B - k^4 I), -2i A^{-1} C]].

``A`` is positive definite for every real ``k != 0``; at ``k = 0`` the
entries of ``A`` blow up like ``1/k^2`` but ``M`` stays analytic, and the
small-``k`` path works with ``k^2 A`` instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, solveh_banded

from .channel_model import ValidatedConfig
from .errors import OutOfAsymptoticRange, SolveFailure, ZeroWavenumber

SMALL_K_THRESHOLD = 1e-4  # on |k| * min(gap)
LARGE_ARG = 40.0  # |k * gap| beyond which coth -> sign, csch -> 0


@dataclass(frozen=True)
class TriSym:
    """Symmetric tridiagonal matrix stored as diagonal + off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diag, dtype=float)
        e = np.asarray(self.off, dtype=float)
        if e.shape != (max(d.size - 1, 0),):
            raise ValueError(f"off-diagonal of order-{d.size} matrix needs {d.size - 1} entries")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "off", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def banded(self) -> np.ndarray:
        """Upper banded storage for :func:`scipy.linalg.solveh_banded`."""
        ab = np.zeros((2, self.n))
        ab[0, 1:] = self.off
        ab[1] = self.diag
        return ab

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``T X = rhs`` by banded Cholesky; requires ``T`` positive definite."""
        if self.n == 1:
            if not self.diag[0] > 0.0:
                raise SolveFailure(f"1x1 matrix {self.diag[0]!r} is not positive definite")
            return np.asarray(rhs) / self.diag[0]
        try:
            return solveh_banded(self.banded(), rhs)
        except LinAlgError as exc:
            raise SolveFailure(f"Cholesky factorisation failed: {exc}") from None

    def is_positive_definite(self) -> bool:
        try:
            self.solve(np.ones(self.n))
        except SolveFailure:
            return False
        return True

    def __add__(self, other: "TriSym") -> "TriSym":
        return TriSym(self.diag + other.diag, self.off + other.off)

    def scale(self, s: float) -> "TriSym":
        return TriSym(s * self.diag, s * self.off)


@dataclass(frozen=True)
class SpectralMatrices:
    k: float
    A: TriSym
    B: TriSym
    C: TriSym


@dataclass(frozen=True)
class GeneratorMatrix:
    k: float
    M: np.ndarray

    @property
    def n(self) -> int:
        return self.M.shape[0] // 2

    def shifted(self, V: float) -> np.ndarray:
        """``ikV I + M(k)``: the generator seen along the ray ``x = V t``."""
        return 1j * self.k * V * np.eye(self.M.shape[0]) + self.M


# ---------------------------------------------------------------------------
# hyperbolic pieces


def coth_csch(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``coth(x)`` and ``csch(x)`` with the large-argument limits applied."""
    x = np.asarray(x, dtype=float)
    big = np.abs(x) > LARGE_ARG
    xs = np.where(big, 1.0, x)
    coth = np.where(big, np.sign(x), 1.0 / np.tanh(xs))
    csch = np.where(big, 0.0, 1.0 / np.sinh(xs))
    return coth, csch


def xcoth_xcsch(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``x coth(x)`` and ``x csch(x)``, analytic at ``x = 0``.

    Uses the fifth-order series below the small-argument threshold.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < SMALL_K_THRESHOLD
    x2 = x * x
    series_coth = 1.0 + x2 / 3.0 - x2 * x2 / 45.0
    series_csch = 1.0 - x2 / 6.0 + 7.0 * x2 * x2 / 360.0
    coth, csch = coth_csch(np.where(small, 1.0, x))
    return np.where(small, series_coth, x * coth), np.where(small, series_csch, x * csch)


def _lower_upper(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # plate i (0-based) sits between gap i (below) and gap i+1 (above)
    return values[:-1], values[1:]


# ---------------------------------------------------------------------------
# construction


def build_abc(config: ValidatedConfig, k: float) -> SpectralMatrices:
    """Closed-form ``A(k)``, ``B(k)``, ``C(k)`` for real ``k != 0``."""
    k = float(k)
    if k == 0.0:
        raise ZeroWavenumber("A(k) has a pole at k = 0; use build_generator", k=k)
    coth, csch = coth_csch(k * config.gaps)
    U = config.flows
    cb, ca = _lower_upper(coth)
    sa = csch[1:-1]
    Ub, Ua = _lower_upper(U)
    Uoff = U[1:-1]
    A = TriSym((k + ca + cb) / k, -sa / k)
    B = TriSym(Ub**2 * cb + Ua**2 * ca, -(Uoff**2) * sa)
    C = TriSym(Ub * cb + Ua * ca, -Uoff * sa)
    return SpectralMatrices(k, A, B, C)


def _rescaled_abc(config: ValidatedConfig, k: float) -> tuple[TriSym, TriSym, TriSym]:
    """``k^2 A``, ``k B`` and ``k C``: all analytic through ``k = 0``."""
    g = config.gaps
    xc, xs = xcoth_xcsch(k * g)
    xc_over = xc / g  # k coth(k g)
    xs_over = xs / g  # k csch(k g)
    cb, ca = _lower_upper(xc_over)
    sa = xs_over[1:-1]
    U = config.flows
    Ub, Ua = _lower_upper(U)
    Uoff = U[1:-1]
    At = TriSym(k * k + ca + cb, -sa)
    kB = TriSym(Ub**2 * cb + Ua**2 * ca, -(Uoff**2) * sa)
    kC = TriSym(Ub * cb + Ua * ca, -Uoff * sa)
    return At, kB, kC


def assemble(n: int, lower_left: np.ndarray, lower_right: np.ndarray) -> np.ndarray:
    M = np.zeros((2 * n, 2 * n), dtype=complex)
    M[:n, n:] = np.eye(n)
    M[n:, :n] = lower_left
    M[n:, n:] = lower_right
    return M


def build_generator(config: ValidatedConfig, k: float, path: str = "auto") -> GeneratorMatrix:
    """The semigroup generator ``M(k)``, including ``k = 0``.

    Parameters
    ----------
    path : {"auto", "direct", "series"}
        ``"auto"`` switches to the rescaled system below the small-``k``
        threshold; the other two force one branch (for crossover checks).
    """
    k = float(k)
    n = config.n
    eye = np.eye(n)
    if path not in ("auto", "direct", "series"):
        raise ValueError(f"unknown path {path!r}")
    small = abs(k) * config.min_gap < SMALL_K_THRESHOLD
    if path == "series" or (path == "auto" and small):
        # A^{-1} X = (k^2 A)^{-1} k^2 X
        At, kB, kC = _rescaled_abc(config, k)
        lower_left = At.solve(k * k * (kB.dense() - k**4 * eye))
        lower_right = -2j * At.solve(k * kC.dense())
    else:
        sm = build_abc(config, k)
        lower_left = sm.A.solve(k * sm.B.dense() - k**4 * eye)
        lower_right = -2j * sm.A.solve(sm.C.dense())
    return GeneratorMatrix(k, assemble(n, lower_left, lower_right))


def build_generator_batch(config: ValidatedConfig, ks) -> np.ndarray:
    """``M(k)`` for many wavenumbers at once, shape ``(len(ks), 2n, 2n)``.

    Uses the rescaled system ``k^2 A`` everywhere, which is well scaled for
    all ``k`` including zero; agrees with :func:`build_generator` to rounding.
    """
    ks = np.asarray(ks, dtype=float).reshape(-1)
    n = config.n
    g = config.gaps
    xc, xs = xcoth_xcsch(np.outer(ks, g))
    kc = xc / g  # k coth(k g)
    kcs = xs / g  # k csch(k g)
    U = config.flows
    idx = np.arange(n)
    At = np.zeros((ks.size, n, n))
    kB = np.zeros((ks.size, n, n))
    kC = np.zeros((ks.size, n, n))
    At[:, idx, idx] = ks[:, None] ** 2 + kc[:, :-1] + kc[:, 1:]
    kB[:, idx, idx] = U[:-1] ** 2 * kc[:, :-1] + U[1:] ** 2 * kc[:, 1:]
    kC[:, idx, idx] = U[:-1] * kc[:, :-1] + U[1:] * kc[:, 1:]
    if n > 1:
        i, j = idx[:-1], idx[1:]
        off = kcs[:, 1:-1]
        for T, w in ((At, 1.0), (kB, U[1:-1] ** 2), (kC, U[1:-1])):
            T[:, i, j] = -w * off
            T[:, j, i] = -w * off
    try:
        np.linalg.cholesky(At)
    except np.linalg.LinAlgError as exc:
        raise SolveFailure(f"Cholesky factorisation failed in batch: {exc}") from None
    k2 = (ks**2)[:, None, None]
    eye = np.eye(n)
    rhs_ll = k2 * kB - (ks**6)[:, None, None] * eye
    rhs_lr = ks[:, None, None] * kC
    sol = np.linalg.solve(At, np.concatenate([rhs_ll, rhs_lr], axis=2))
    M = np.zeros((ks.size, 2 * n, 2 * n), dtype=complex)
    M[:, :n, n:] = eye
    M[:, n:, :n] = sol[:, :, :n]
    M[:, n:, n:] = -2j * sol[:, :, n:]
    return M


def generator_from_abc(sm: SpectralMatrices) -> GeneratorMatrix:
    """Generator from explicit matrices (used for fault-injection tests)."""
    n = sm.A.n
    lower_left = sm.A.solve(sm.k * sm.B.dense() - sm.k**4 * np.eye(n))
    lower_right = -2j * sm.A.solve(sm.C.dense())
    return GeneratorMatrix(sm.k, assemble(n, lower_left, lower_right))


def pencil(sm: SpectralMatrices, mu: float) -> TriSym:
    """``mu^2 A + 2 mu C + k B - k^4 I`` as a tridiagonal matrix."""
    k = sm.k
    shift = TriSym(np.full(sm.A.n, -(k**4)), np.zeros(sm.A.n - 1))
    return sm.A.scale(mu * mu) + sm.C.scale(2.0 * mu) + sm.B.scale(k) + shift


def tridiagonal_det(T: TriSym) -> float:
    """Determinant by the three-term continuant recurrence."""
    prev, cur = 1.0, T.diag[0]
    for i in range(1, T.n):
        prev, cur = cur, T.diag[i] * cur - T.off[i - 1] ** 2 * prev
    return float(cur)


def char_poly_eval(sm: SpectralMatrices, mu: float) -> float:
    """Literal ``det(mu^2 A + 2 mu C + k B - k^4 I)``.

    Relates to ``det(i mu I - M)`` by the factor ``(-1)^n / det(A)``
    (see :func:`char_poly_constant`).
    """
    return tridiagonal_det(pencil(sm, float(mu)))


def char_poly_constant(sm: SpectralMatrices) -> float:
    """``c`` with ``det(i mu I - M) = c * char_poly_eval(sm, mu)`` for every ``mu``."""
    return (-1.0) ** sm.A.n / tridiagonal_det(sm.A)


def asymptotic_generator(config: ValidatedConfig, k: float, refined: bool = False) -> GeneratorMatrix:
    """Large-``|k|`` reference generator with diagonal ``A``, ``B``, ``C``.

    By default ``A -> I``, so the eigenvalues solve the per-plate quadratics
    ``lam^2 + 2i (U_m + U_m+1) lam - k (U_m^2 + U_m+1^2) + k^4 = 0``; this
    differs from ``M`` by ``O(1/|k|)`` relative.  ``refined=True`` keeps the
    exact limit ``A -> (1 + 2/|k|) I`` instead, leaving only the
    exponentially small ``coth - 1`` and ``csch`` terms.

    The limits are those of ``k > 0``; for ``k < 0`` the odd matrices ``B``
    and ``C`` flip sign, which keeps ``P(-k) = conj(P(k))`` like ``M``.
    """
    k = float(k)
    if abs(k) * config.min_gap <= 1.0:
        raise OutOfAsymptoticRange("asymptotic generator needs |k| min(gap) > 1", k=k)
    n = config.n
    U = config.flows
    s = np.sign(k)
    a = 1.0 + 2.0 / abs(k) if refined else 1.0
    b = s * (U[:-1] ** 2 + U[1:] ** 2)
    c = s * (U[:-1] + U[1:])
    lower_left = np.diag((k * b - k**4) / a)
    lower_right = np.diag(-2j * c / a)
    return GeneratorMatrix(k, assemble(n, lower_left, lower_right))


def dump_csv(config: ValidatedConfig, k: float, path) -> None:
    """Write the entries of ``A, B, C`` and ``M`` at ``k`` for debugging."""
    sm = build_abc(config, k)
    M = build_generator(config, k).M
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["matrix", "row", "col", "re", "im"])
        for name, T in (("A", sm.A), ("B", sm.B), ("C", sm.C)):
            D = T.dense()
            for i, j in zip(*np.nonzero(D)):
                w.writerow([name, i, j, f"{D[i, j]:.17e}", f"{0.0:.17e}"])
        for i, j in zip(*np.nonzero(M)):
            w.writerow(["M", i, j, f"{M[i, j].real:.17e}", f"{M[i, j].imag:.17e}"])
