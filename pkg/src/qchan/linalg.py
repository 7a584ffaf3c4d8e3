"""Dense complex and Hermitian linear-algebra primitives.

Vectorization convention: a matrix A in C^{n x m} corresponds to the
length m*n vector obtained by stacking its columns, so segment i of the
vector (length n) is column i of the matrix.  The standard inner products
<u, v> = v* u and <U, V> = tr V* U match under this identification.

All rank decisions are numeric: an eigenvalue (or singular value) counts
as nonzero when its magnitude exceeds rank_rel_tol * dim * spectral_max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    NotPSDError,
    NumericalFailureError,
    ShapeError,
    SingularMatrixError,
)


@dataclass(frozen=True)
class TolerancePolicy:
    """Thresholds shared by every rank, PSD, and search decision."""

    hermitian_tol: float = 1e-8
    psd_tol: float = 1e-9
    rank_rel_tol: float = 1e-10
    search_tol: float = 1e-9

    def __post_init__(self):
        for name in ("hermitian_tol", "psd_tol", "rank_rel_tol", "search_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")

    def rank_threshold(self, dim: int, spectral_max: float) -> float:
        return self.rank_rel_tol * dim * spectral_max


DEFAULT_TOL = TolerancePolicy()


def require_finite(a: np.ndarray, what: str = "matrix") -> np.ndarray:
    a = np.asarray(a)
    if not np.isfinite(a).all():
        raise ShapeError(f"{what} contains non-finite entries")
    return a


def vec(a: np.ndarray) -> np.ndarray:
    """Stack the columns of an n x m matrix into a length m*n vector."""
    a = np.asarray(a)
    if a.ndim != 2:
        raise ShapeError(f"expected a matrix, got array of ndim {a.ndim}")
    return np.ascontiguousarray(a.T).reshape(-1)


def unvec(z: np.ndarray, m: int, n: int) -> np.ndarray:
    """Inverse of vec: rebuild the n x m matrix whose column i is segment i."""
    z = np.asarray(z).reshape(-1)
    if z.size != m * n:
        raise ShapeError(f"vector of length {z.size} does not reshape to {n}x{m}")
    return np.ascontiguousarray(z.reshape(m, n).T)


def hermitize(h: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Return (H + H*)/2 after checking H is Hermitian within tolerance."""
    h = np.asarray(h, dtype=complex)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {h.shape}")
    require_finite(h)
    asym = np.abs(h - h.conj().T).max() if h.size else 0.0
    scale = max(1.0, float(np.abs(h).max()) if h.size else 0.0)
    if asym > tol.hermitian_tol * scale:
        raise ShapeError(
            f"matrix is not Hermitian within tolerance (max asymmetry {asym:.3e})"
        )
    return (h + h.conj().T) / 2


@dataclass(frozen=True)
class EigenSummary:
    """Spectral data of a Hermitian matrix with tolerance-aware rank."""

    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # unitary, column i pairs with eigenvalues[i]
    numeric_rank: int
    min_eigenvalue: float
    is_psd: bool
    rank_threshold: float


def herm_eig(
    h: np.ndarray,
    tol: TolerancePolicy = DEFAULT_TOL,
    assume_hermitian: bool = False,
) -> EigenSummary:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    if not assume_hermitian:
        h = hermitize(h, tol)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalFailureError(f"eigendecomposition failed: {exc}") from exc
    spectral_max = float(np.abs(w).max()) if w.size else 0.0
    thr = tol.rank_threshold(h.shape[0], spectral_max)
    rank = int((np.abs(w) > thr).sum())
    wmin = float(w.min()) if w.size else 0.0
    return EigenSummary(
        eigenvalues=w,
        eigenvectors=v,
        numeric_rank=rank,
        min_eigenvalue=wmin,
        is_psd=wmin >= -tol.psd_tol,
        rank_threshold=thr,
    )


def svd_rank(a: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL):
    """Numeric rank of a general matrix.

    Returns (rank, singular_values, threshold); the threshold follows the
    same rule as the Hermitian rank with dim = max(a.shape).
    """
    a = np.asarray(a, dtype=complex)
    if a.size == 0:
        return 0, np.zeros(0), 0.0
    s = np.linalg.svd(a, compute_uv=False)
    thr = tol.rank_threshold(max(a.shape), float(s[0]))
    return int((s > thr).sum()), s, thr


def values_near_threshold(values: np.ndarray, threshold: float) -> bool:
    """True when any magnitude falls within a factor 10 of the threshold.

    Rank decisions with such values are flagged as ill-conditioned by the
    callers; exact zeros and comfortably large values never trigger.
    """
    if threshold <= 0:
        return False
    mags = np.abs(np.asarray(values, dtype=float))
    return bool(((mags > threshold / 10) & (mags < threshold * 10)).any())


def psd_sqrt(
    h: np.ndarray,
    inverse: bool = False,
    tol: TolerancePolicy = DEFAULT_TOL,
) -> np.ndarray:
    """Unique positive square root of a PSD matrix (or of its inverse)."""
    e = herm_eig(h, tol)
    if not e.is_psd:
        raise NotPSDError(
            f"matrix is not PSD: min eigenvalue {e.min_eigenvalue:.3e}"
        )
    if inverse and e.min_eigenvalue <= e.rank_threshold:
        raise SingularMatrixError(
            "matrix is singular at the working tolerance; no inverse square root"
        )
    w = np.clip(e.eigenvalues, 0.0, None)
    vals = 1.0 / np.sqrt(w) if inverse else np.sqrt(w)
    r = (e.eigenvectors * vals) @ e.eigenvectors.conj().T
    return (r + r.conj().T) / 2


def range_basis(h: np.ndarray, tol: TolerancePolicy = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal columns spanning the range of a Hermitian matrix."""
    e = herm_eig(h, tol)
    mask = np.abs(e.eigenvalues) > e.rank_threshold
    return e.eigenvectors[:, mask]


def range_basis_from_eigen(e: EigenSummary) -> np.ndarray:
    mask = np.abs(e.eigenvalues) > e.rank_threshold
    return e.eigenvectors[:, mask]


def rank_one_margin(
    a: np.ndarray,
    u: np.ndarray,
    tol: TolerancePolicy = DEFAULT_TOL,
):
    """Largest eps with A - eps*uu* still PSD, for PSD A.

    Returns (in_range, eps_max).  When u lies in the range of A,
    eps_max = 1 / (u* A^+ u) and subtracting eps_max * uu* drops the rank
    of A by exactly one.  When u is outside the range no positive eps
    keeps the difference PSD, so (False, 0.0) is returned.
    """
    u = np.asarray(u, dtype=complex).reshape(-1)
    norm_u = float(np.linalg.norm(u))
    if norm_u == 0.0:
        raise ValueError("u must be nonzero")
    e = herm_eig(a, tol)
    if not e.is_psd:
        raise NotPSDError(
            f"matrix is not PSD: min eigenvalue {e.min_eigenvalue:.3e}"
        )
    mask = np.abs(e.eigenvalues) > e.rank_threshold
    p = e.eigenvectors[:, mask]
    resid = float(np.linalg.norm(u - p @ (p.conj().T @ u)))
    if resid > tol.search_tol * norm_u:
        return False, 0.0
    lam = e.eigenvalues[mask]
    coeff = p.conj().T @ u
    quad = float(np.real(np.sum(np.abs(coeff) ** 2 / lam)))
    return True, 1.0 / quad
