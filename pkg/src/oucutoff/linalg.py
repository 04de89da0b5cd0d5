"""Dense linear-algebra kernels for small matrices (m <= 64).

Provides the four operations everything else is built on: the matrix
exponential, the full complex eigendecomposition, the symmetric PSD square
root, and the continuous-time Lyapunov solve.  All functions are pure and
deterministic; inputs are never mutated.

Matrices are plain ``numpy.ndarray`` of float64 (real) entries.  CSV
round-tripping for fixtures uses one row per line with ``%.17g`` formatting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import (
    DimensionError,
    DomainError,
    NotPSDError,
    NumericalFailure,
    StabilityError,
)

MAX_DIM = 64

#: minimum pairwise eigenvalue gap, relative to 1 + max|lambda|, below which a
#: spectrum is declared non-generic.  The source material gives no tolerance;
#: this one is surfaced in reports so callers can see which convention applied.
DISTINCTNESS_RTOL = 1e-8

#: eigenvalues of a nominally PSD matrix may dip this far below zero (scaled
#: by matrix magnitude) before the matrix is rejected; anything in between is
#: clamped to zero as roundoff.
PSD_CLAMP = 1e-10


def frobenius(m: np.ndarray) -> float:
    """Frobenius norm, the matrix norm used throughout."""
    return float(np.linalg.norm(np.asarray(m, dtype=complex)))


def _as_square(m, name: str) -> np.ndarray:
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    if a.shape[0] == 0 or a.shape[0] > MAX_DIM:
        raise DimensionError(f"{name} must have 1 <= m <= {MAX_DIM}, got m={a.shape[0]}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    return a


def mat_exp(m: np.ndarray, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^(M t)``.

    Evaluated by scaling-and-squaring with a Pade approximant whose order and
    squaring depth follow the norm of ``M t`` (LAPACK-backed ``scipy`` expm).

    Parameters
    ----------
    m : ndarray, shape (k, k)
        Square matrix.
    t : float
        Time multiplier; may be negative.

    Returns
    -------
    ndarray, shape (k, k)
    """
    a = _as_square(m, "mat_exp argument")
    t = float(t)
    if not np.isfinite(t):
        raise DomainError(f"time must be finite, got {t}")
    if t == 0.0:
        return np.eye(a.shape[0])
    return expm(a * t)


@dataclass(frozen=True)
class ComplexEigenSystem:
    """Full complex spectrum of a real square matrix.

    Eigenvalues are sorted by (real part, |imag|), so complex-conjugate pairs
    sit adjacently with the +imag member first.  Eigenvector columns have unit
    norm and a fixed phase (largest-modulus component real positive), which
    makes downstream coefficient solves reproducible.
    """

    eigenvalues: np.ndarray   # (m,) complex
    eigenvectors: np.ndarray  # (m, m) complex, columns are unit eigenvectors
    pairwise_distinct: bool
    normal: bool

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def min_real(self) -> float:
        return float(np.min(self.eigenvalues.real))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))


def _phase_normalize(vecs: np.ndarray) -> np.ndarray:
    out = vecs.copy()
    for j in range(out.shape[1]):
        k = int(np.argmax(np.abs(out[:, j])))
        piv = out[k, j]
        if piv != 0:
            out[:, j] = out[:, j] * (abs(piv) / piv)
        nrm = np.linalg.norm(out[:, j])
        if nrm > 0:
            out[:, j] /= nrm
    return out


def _refine_eigenvectors(a: np.ndarray, lam: np.ndarray, vecs: np.ndarray,
                         steps: int = 2) -> np.ndarray:
    # Two inverse-iteration sweeps sharpen the eigenvectors beyond the raw QR
    # output; rate and coefficient computations downstream are sensitive to
    # eigenvector quality.  The shift is perturbed off the eigenvalue so the
    # solve stays (barely) nonsingular; errors it introduces align with the
    # eigenvector direction and vanish under normalization.
    m = a.shape[0]
    ac = a.astype(complex)
    out = vecs.copy()
    eye = np.eye(m, dtype=complex)
    for j in range(m):
        shift = lam[j] + 1e-12 * (1.0 + abs(lam[j]))
        b = ac - shift * eye
        v = out[:, j]
        for _ in range(steps):
            try:
                w = np.linalg.solve(b, v)
            except np.linalg.LinAlgError:
                break
            nrm = np.linalg.norm(w)
            if not np.isfinite(nrm) or nrm == 0:
                break
            v = w / nrm
        out[:, j] = v
    return _phase_normalize(out)


def is_normal(m: np.ndarray, rtol: float = 1e-10) -> bool:
    """True iff ``M M* = M* M`` within ``rtol * ||M||_F^2``."""
    a = _as_square(m, "is_normal argument")
    comm = a @ a.T - a.T @ a
    return frobenius(comm) <= rtol * max(frobenius(a) ** 2, np.finfo(float).tiny)


def eig(m: np.ndarray) -> ComplexEigenSystem:
    """Complex eigendecomposition of a real square matrix.

    The spectrum comes from Hessenberg reduction plus shifted QR iteration
    (LAPACK geev); eigenvectors are refined by two inverse-iteration steps.
    Raises :class:`NumericalFailure` (carrying whatever partial spectrum is
    available) if the QR iteration does not converge.
    """
    a = _as_square(m, "eig argument")
    try:
        lam, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"eigenvalue iteration failed to converge: {exc}",
                               payload=None) from exc
    order = np.lexsort((-lam.imag, np.abs(lam.imag), lam.real))
    lam = lam[order]
    vecs = _phase_normalize(vecs[:, order].astype(complex))
    vecs = _refine_eigenvectors(a, lam, vecs)

    resid = np.max(np.linalg.norm(a @ vecs - vecs * lam[None, :], axis=0))
    scale = max(frobenius(a), np.finfo(float).tiny)
    if resid > 1e-9 * scale:
        raise NumericalFailure(
            f"eigenpair residual {resid:.3e} exceeds 1e-9*||A|| after refinement",
            payload=(lam, vecs))

    if a.shape[0] > 1:
        gaps = np.abs(lam[:, None] - lam[None, :])
        np.fill_diagonal(gaps, np.inf)
        distinct = bool(gaps.min() > DISTINCTNESS_RTOL * (1.0 + np.max(np.abs(lam))))
    else:
        distinct = True
    return ComplexEigenSystem(eigenvalues=lam, eigenvectors=vecs,
                              pairwise_distinct=distinct, normal=is_normal(a))


def psd_sqrt(c: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root of a symmetric PSD matrix.

    Uses the symmetric eigendecomposition; eigenvalues in
    ``[-PSD_CLAMP * scale, 0)`` are clamped to zero as roundoff, anything more
    negative raises :class:`NotPSDError`.

    Guarantees ``||S S - C||_F <= 1e-9 * max(1, ||C||_F)``.
    """
    a = _as_square(c, "psd_sqrt argument")
    scale = max(1.0, frobenius(a))
    if frobenius(a - a.T) > 1e-10 * scale:
        raise DomainError("psd_sqrt requires a symmetric matrix "
                          f"(asymmetry {frobenius(a - a.T):.3e})")
    sym = 0.5 * (a + a.T)
    w, u = np.linalg.eigh(sym)
    if w.min() < -PSD_CLAMP * scale:
        raise NotPSDError(f"matrix has eigenvalue {w.min():.3e} < -{PSD_CLAMP:g}*scale")
    w = np.clip(w, 0.0, None)
    s = (u * np.sqrt(w)) @ u.T
    return 0.5 * (s + s.T)


def positively_stable(m: np.ndarray, margin: float = 1e-10):
    """Return (flag, eigenvalues): flag is True iff every Re(lambda) > margin."""
    a = _as_square(m, "stability-check argument")
    lam = np.linalg.eigvals(a)
    return bool(np.min(lam.real) > margin), lam


def lyapunov_solve(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Solve ``A S + S A^T = Q`` for a positively stable ``A``.

    The equation is flattened to the m^2 x m^2 Kronecker system
    ``(I (x) A + A (x) I) vec(S) = vec(Q)`` and eliminated with partial
    pivoting; at m <= 64 this is far easier to audit than Bartels-Stewart and
    fast enough.  With ``Q = sigma sigma^T`` the solution is the stationary
    covariance of the OU system.

    Raises
    ------
    StabilityError
        If some eigenvalue of ``A`` has real part <= 1e-10.
    NumericalFailure
        If the Kronecker system is singular or the residual check fails.
    """
    a = _as_square(a, "lyapunov drift matrix")
    qm = _as_square(q, "lyapunov right-hand side")
    if qm.shape != a.shape:
        raise DimensionError(f"A and Q must have equal shapes, got {a.shape} vs {qm.shape}")
    qscale = max(1.0, frobenius(qm))
    if frobenius(qm - qm.T) > 1e-10 * qscale:
        raise DomainError("lyapunov right-hand side must be symmetric")
    ok, lam = positively_stable(a)
    if not ok:
        bad = lam[int(np.argmin(lam.real))]
        raise StabilityError(f"drift matrix is not positively stable: eigenvalue {bad}")

    m = a.shape[0]
    eye = np.eye(m)
    k = np.kron(eye, a) + np.kron(a, eye)  # row-major vec convention
    try:
        s = np.linalg.solve(k, qm.reshape(-1)).reshape(m, m)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"Kronecker Lyapunov system is singular: {exc}") from exc
    s = 0.5 * (s + s.T)
    resid = frobenius(a @ s + s @ a.T - qm)
    if resid > 1e-10 * qscale:
        raise NumericalFailure(f"Lyapunov residual {resid:.3e} exceeds 1e-10*max(1,||Q||)")
    return s


def matrix_to_csv(m: np.ndarray, path) -> None:
    """Write a matrix as CSV, one row per line, %.17g entries."""
    a = np.atleast_2d(np.asarray(m, dtype=float))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in a:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")


def matrix_from_csv(path) -> np.ndarray:
    """Read a matrix written by :func:`matrix_to_csv`."""
    a = np.loadtxt(path, delimiter=",", ndmin=2, dtype=float)
    return a
