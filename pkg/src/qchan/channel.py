"""Quantum channels with synchronized Kraus and Choi representations.

A channel from m x m to n x n matrices is stored through its Choi matrix,
the mn x mn Hermitian matrix whose (i, j) block of size n x n is the image
of e_i e_j^T.  The Choi matrix is the source of truth: the stored Kraus
operators are always re-derived from its eigendecomposition, which makes
them pairwise trace-orthogonal and deterministic up to the fixed phase
gauge below.

Flat indexing: block i occupies rows (i-1)*n + 1 .. i*n, matching the
column-stacking convention of :mod:`qchan.linalg` (the Choi matrix of the
single-operator map X -> A X A* is vec(A) vec(A)*).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotAChannelError, ShapeError
from .linalg import (
    DEFAULT_TOL,
    EigenSummary,
    TolerancePolicy,
    herm_eig,
    hermitize,
    psd_sqrt,
    range_basis_from_eigen,
    require_finite,
    unvec,
    vec,
)

# Block traces are accepted as exactly trace preserving below this residual;
# violations up to REPAIR_TOL are projected back with a warning flag.
TP_TOL = 1e-8
UNITAL_TOL = 1e-8
REPAIR_TOL = 1e-6
ROUND_TRIP_TOL = 1e-10

# Guard for tensor products: refuse Choi matrices beyond this order.
MAX_CHOI_DIM = 256


def block_traces(z: np.ndarray, m: int, n: int) -> np.ndarray:
    """The m x m matrix of block traces T_ij = tr Z_ij."""
    z4 = np.asarray(z).reshape(m, n, m, n)
    return np.einsum("ipjp->ij", z4)


def identity_image(z: np.ndarray, m: int, n: int) -> np.ndarray:
    """Sum of the diagonal blocks, i.e. the image of the identity."""
    z4 = np.asarray(z).reshape(m, n, m, n)
    return np.einsum("ipiq->pq", z4)


def choi_from_kraus(operators, m: int | None = None, n: int | None = None) -> np.ndarray:
    """Assemble the Choi matrix sum_i vec(A_i) vec(A_i)* of a Kraus set."""
    ops = [require_finite(np.asarray(a, dtype=complex), "Kraus operator") for a in operators]
    if not ops:
        raise ShapeError("Kraus set must be nonempty")
    if n is None or m is None:
        n, m = ops[0].shape
    for a in ops:
        if a.shape != (n, m):
            raise ShapeError(
                f"Kraus operators must all be {n}x{m}, got {a.shape}"
            )
    z = np.zeros((m * n, m * n), dtype=complex)
    for a in ops:
        v = vec(a)
        z += np.outer(v, v.conj())
    return z


def _phase_fixed(a: np.ndarray) -> np.ndarray:
    """Rotate a matrix by a global phase so its largest-modulus entry
    (first in flat order among ties) is real positive."""
    flat = a.reshape(-1)
    idx = int(np.argmax(np.abs(flat)))
    piv = flat[idx]
    mag = abs(piv)
    if mag == 0.0:
        return a
    return a * (piv.conjugate() / mag)


def _kraus_from_eigen(eigen: EigenSummary, m: int, n: int) -> tuple[np.ndarray, ...]:
    """Kraus operators from a Choi eigendecomposition, eigenvalue descending,
    each phase-fixed."""
    mask = eigen.eigenvalues > eigen.rank_threshold
    lams = eigen.eigenvalues[mask][::-1]
    vecs = eigen.eigenvectors[:, mask][:, ::-1]
    ops = []
    for lam, u in zip(lams, vecs.T):
        ops.append(_phase_fixed(unvec(np.sqrt(lam) * u, m, n)))
    return tuple(ops)


def kraus_from_choi(z: np.ndarray, m: int, n: int, tol: TolerancePolicy = DEFAULT_TOL):
    """Minimal trace-orthogonal Kraus set of a valid Choi matrix.

    Returns exactly choi_rank operators A_i with tr A_j* A_i = lambda_i
    delta_ij.  Raises when the input is not PSD or violates the block
    trace conditions beyond tolerance.
    """
    z = hermitize(z, tol)
    if z.shape[0] != m * n:
        raise ShapeError(f"Choi matrix must have order {m * n}, got {z.shape[0]}")
    eigen = herm_eig(z, tol, assume_hermitian=True)
    if not eigen.is_psd:
        raise NotAChannelError(
            f"not completely positive: min Choi eigenvalue {eigen.min_eigenvalue:.3e}"
        )
    resid, (i, j), value = _worst_block_trace(z, m, n)
    if resid > TP_TOL:
        expected = 1 if i == j else 0
        raise NotAChannelError(
            f"not trace preserving: block trace ({i + 1},{j + 1}) = {value:.6g}, "
            f"expected {expected}"
        )
    return _kraus_from_eigen(eigen, m, n)


def _worst_block_trace(z: np.ndarray, m: int, n: int):
    t = block_traces(z, m, n)
    dev = np.abs(t - np.eye(m))
    i, j = np.unravel_index(int(np.argmax(dev)), dev.shape)
    return float(dev[i, j]), (int(i), int(j)), complex(t[i, j])


@dataclass(frozen=True)
class ChannelReport:
    """Validation summary of a Choi matrix against the channel conditions."""

    is_cp: bool
    is_tp: bool
    is_unital: bool
    choi_rank: int
    min_choi_eigenvalue: float
    block_trace_residual: float


def validate(z: np.ndarray, m: int, n: int, tol: TolerancePolicy = DEFAULT_TOL) -> ChannelReport:
    """Check CP / TP / unitality of a Hermitian matrix interpreted as a
    Choi matrix.  Failures are reported, not raised."""
    z = np.asarray(z, dtype=complex)
    if z.shape != (m * n, m * n):
        raise ShapeError(f"Choi matrix must be {m * n}x{m * n}, got {z.shape}")
    require_finite(z, "Choi matrix")
    z = (z + z.conj().T) / 2
    eigen = herm_eig(z, tol, assume_hermitian=True)
    bt_resid, _, _ = _worst_block_trace(z, m, n)
    unital_resid = float(np.abs(identity_image(z, m, n) - np.eye(n)).max())
    return ChannelReport(
        is_cp=eigen.is_psd,
        is_tp=bt_resid <= TP_TOL,
        is_unital=unital_resid <= UNITAL_TOL,
        choi_rank=eigen.numeric_rank,
        min_choi_eigenvalue=eigen.min_eigenvalue,
        block_trace_residual=bt_resid,
    )


@dataclass(frozen=True)
class Channel:
    """A completely positive trace-preserving map held in both
    representations, immutable after construction.

    ``kraus`` holds the canonical operators derived from the Choi
    eigendecomposition (descending eigenvalue, phase gauge fixed), so two
    channels are compared through their Choi matrices rather than
    operator by operator.
    """

    m: int
    n: int
    kraus: tuple[np.ndarray, ...]
    choi: np.ndarray
    choi_rank: int
    eigen: EigenSummary = field(repr=False)
    tol: TolerancePolicy = field(repr=False, default=DEFAULT_TOL)
    repaired: bool = False

    # -- construction ---------------------------------------------------

    @classmethod
    def from_choi(
        cls,
        z: np.ndarray,
        m: int,
        n: int,
        tol: TolerancePolicy = DEFAULT_TOL,
        repair: bool = True,
    ) -> "Channel":
        """Build a channel from a Choi matrix.

        Inputs violating CP or TP by at most REPAIR_TOL are projected back
        onto the channel set (negative eigenvalues clamped, block traces
        rescaled) and flagged ``repaired``; larger violations raise
        NotAChannelError naming the first violated constraint.
        """
        if m < 1 or n < 1:
            raise ShapeError("dimensions must be positive")
        z = np.asarray(z, dtype=complex)
        if z.shape != (m * n, m * n):
            raise ShapeError(f"Choi matrix must be {m * n}x{m * n}, got {z.shape}")
        z = hermitize(z, tol)

        repaired = False
        w, v = np.linalg.eigh(z)
        neg = max(0.0, -float(w.min()))
        if neg > (REPAIR_TOL if repair else tol.psd_tol):
            raise NotAChannelError(
                f"not completely positive: min Choi eigenvalue {w.min():.3e}"
            )
        if neg > 1e-14:
            if neg > tol.psd_tol:
                repaired = True
            z = (v * np.clip(w, 0.0, None)) @ v.conj().T
            z = (z + z.conj().T) / 2

        resid, (i, j), value = _worst_block_trace(z, m, n)
        if resid > (REPAIR_TOL if repair else TP_TOL):
            expected = 1 if i == j else 0
            raise NotAChannelError(
                f"not trace preserving: block trace ({i + 1},{j + 1}) = {value:.6g}, "
                f"expected {expected}"
            )
        if resid > TP_TOL:
            repaired = True
            t = hermitize(block_traces(z, m, n), tol)
            s = psd_sqrt(t, inverse=True, tol=tol)
            corr = np.kron(s, np.eye(n))
            z = corr @ z @ corr.conj().T
            z = (z + z.conj().T) / 2

        eigen = herm_eig(z, tol, assume_hermitian=True)
        ops = _kraus_from_eigen(eigen, m, n)
        if not ops:
            raise NotAChannelError("Choi matrix is numerically zero")
        return cls(
            m=m,
            n=n,
            kraus=ops,
            choi=z,
            choi_rank=eigen.numeric_rank,
            eigen=eigen,
            tol=tol,
            repaired=repaired,
        )

    @classmethod
    def from_kraus(
        cls,
        operators,
        tol: TolerancePolicy = DEFAULT_TOL,
        repair: bool = True,
    ) -> "Channel":
        """Build a channel from any Kraus set; the stored operators are the
        canonical trace-orthogonal set, not the input."""
        ops = [np.asarray(a, dtype=complex) for a in operators]
        if not ops:
            raise ShapeError("Kraus set must be nonempty")
        n, m = ops[0].shape if ops[0].ndim == 2 else (0, 0)
        if ops[0].ndim != 2:
            raise ShapeError("Kraus operators must be matrices")
        for a in ops:
            if np.linalg.norm(a) == 0.0:
                raise ShapeError("Kraus set contains a zero operator")
        z = choi_from_kraus(ops, m, n)
        return cls.from_choi(z, m, n, tol=tol, repair=repair)

    # -- queries ----------------------------------------------------------

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Image of an m x m matrix, computed as sum_i A_i X A_i*."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.m, self.m):
            raise ShapeError(f"input must be {self.m}x{self.m}, got {x.shape}")
        out = np.zeros((self.n, self.n), dtype=complex)
        for a in self.kraus:
            out += a @ x @ a.conj().T
        return out

    def adjoint(self) -> "AdjointMap":
        """The adjoint map, completely positive and unital, with Kraus
        operators A_i*."""
        return AdjointMap(tuple(a.conj().T for a in self.kraus), self.n, self.m)

    def report(self) -> ChannelReport:
        return validate(self.choi, self.m, self.n, self.tol)

    @property
    def is_unital(self) -> bool:
        resid = np.abs(identity_image(self.choi, self.m, self.n) - np.eye(self.n)).max()
        return bool(resid <= UNITAL_TOL)

    def range_basis(self) -> np.ndarray:
        """Orthonormal basis of the range of the Choi matrix (mn x choi_rank)."""
        return range_basis_from_eigen(self.eigen)

    def choi_distance(self, other: "Channel") -> float:
        """Relative Frobenius distance between Choi matrices."""
        diff = float(np.linalg.norm(self.choi - other.choi))
        return diff / max(1.0, float(np.linalg.norm(self.choi)))

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return (
            f"Channel(m={self.m}, n={self.n}, choi_rank={self.choi_rank}, "
            f"repaired={self.repaired})"
        )


@dataclass(frozen=True)
class AdjointMap:
    """Kraus description of the adjoint of a channel (maps n x n to m x m)."""

    operators: tuple[np.ndarray, ...]
    m: int  # input dimension of the adjoint
    n: int  # output dimension of the adjoint

    def apply(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        if y.shape != (self.m, self.m):
            raise ShapeError(f"input must be {self.m}x{self.m}, got {y.shape}")
        out = np.zeros((self.n, self.n), dtype=complex)
        for b in self.operators:
            out += b @ y @ b.conj().T
        return out


def tensor(l1: Channel, l2: Channel, max_choi_dim: int = MAX_CHOI_DIM) -> Channel:
    """Tensor product channel, Kraus set = all pairwise Kronecker products."""
    m, n = l1.m * l2.m, l1.n * l2.n
    if m * n > max_choi_dim:
        raise ValueError(
            f"tensor product Choi dimension {m * n} exceeds the cap {max_choi_dim}"
        )
    ops = [np.kron(a, b) for a in l1.kraus for b in l2.kraus]
    return Channel.from_kraus(ops, tol=l1.tol)


def direct_sum(l1: Channel, l2: Channel) -> Channel:
    """Channel with block-diagonal Choi matrix diag(Z1, Z2).

    Both inputs must share the output dimension; the result acts on
    (p+q) x (p+q) inputs, applying l1 to the top-left block, l2 to the
    bottom-right block, and annihilating the off-diagonal blocks.
    """
    if l1.n != l2.n:
        raise ShapeError(
            f"direct sum needs equal output dimensions, got {l1.n} and {l2.n}"
        )
    p, q, n = l1.m, l2.m, l1.n
    dim = (p + q) * n
    z = np.zeros((dim, dim), dtype=complex)
    z[: p * n, : p * n] = l1.choi
    z[p * n :, p * n :] = l2.choi
    return Channel.from_choi(z, p + q, n, tol=l1.tol)
