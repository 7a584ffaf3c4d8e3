"""Extreme-point certification for quantum channels.

Two independent criteria are implemented and cross-checked:

* the block-trace kernel test: a channel with Choi rank k is extreme
  exactly when no nonzero Hermitian matrix supported on the range of its
  Choi matrix has all block traces zero; operationally, the m^2 real
  block-trace functionals evaluated on a k^2-dimensional Hermitian basis
  of that support must form a matrix of full column rank;

* the Kraus-product independence test: with a linearly independent Kraus
  set A_1..A_k, the channel is extreme exactly when the k^2 products
  A_i* A_j are linearly independent.

Channels with Choi rank above m are never extreme, and the kernel test
produces a constructive witness there as well; ``convex_split`` converts
any witness into a convex decomposition into two channels of strictly
smaller Choi rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Channel, block_traces
from .errors import InvalidWitnessError, PreconditionError
from .linalg import (
    DEFAULT_TOL,
    TolerancePolicy,
    hermitize,
    psd_sqrt,
    svd_rank,
    values_near_threshold,
    vec,
)
from .sampling import min_choi_rank

__all__ = [
    "min_choi_rank",
    "TraceFunctionals",
    "ExtremalityVerdict",
    "kraus_product_independence",
    "nullspace_functional_test",
    "is_extreme",
    "convex_split",
    "decomposable_nonextreme_check",
]


@dataclass(frozen=True)
class TraceFunctionals:
    """The m^2 x k^2 real matrix of block-trace functionals.

    Columns follow the Hermitian basis of the Choi-range support in the
    order: diagonal units E_aa for a = 1..k, then for each pair a < b the
    symmetric unit (E_ab + E_ba) followed by the skew unit i(E_ab - E_ba).
    Rows are tr Z_ii for i = 1..m, then Re tr Z_ij and Im tr Z_ij for
    each pair i < j.
    """

    matrix: np.ndarray
    m: int
    k: int


def _herm_basis_size(k: int) -> int:
    return k * k


def _trace_functionals(p: np.ndarray, m: int, n: int) -> TraceFunctionals:
    """Functional matrix for the subspace {P H P* : H Hermitian k x k}."""
    k = p.shape[1]
    p4 = p.reshape(m, n, k)
    # g[i, j, a, b] is the (i, j) block trace of P E_ab P*
    g = np.einsum("ipa,jpb->ijab", p4, p4.conj())

    cols = []
    for a in range(k):
        cols.append(g[:, :, a, a])
    for a in range(k):
        for b in range(a + 1, k):
            cols.append(g[:, :, a, b] + g[:, :, b, a])
            cols.append(1j * (g[:, :, a, b] - g[:, :, b, a]))

    rows_per_col = []
    for t in cols:
        row = [t[i, i].real for i in range(m)]
        for i in range(m):
            for j in range(i + 1, m):
                row.append(t[i, j].real)
                row.append(t[i, j].imag)
        rows_per_col.append(row)
    matrix = np.array(rows_per_col, dtype=float).T  # m^2 x k^2
    return TraceFunctionals(matrix=matrix, m=m, k=k)


def _basis_combination(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Hermitian k x k matrix with the given coordinates in the basis order
    used by :func:`_trace_functionals`."""
    h = np.zeros((k, k), dtype=complex)
    idx = 0
    for a in range(k):
        h[a, a] += coeffs[idx]
        idx += 1
    for a in range(k):
        for b in range(a + 1, k):
            h[a, b] += coeffs[idx]
            h[b, a] += coeffs[idx]
            idx += 1
            h[a, b] += 1j * coeffs[idx]
            h[b, a] += -1j * coeffs[idx]
            idx += 1
    return h


def kraus_product_independence(kraus, m: int, tol: TolerancePolicy = DEFAULT_TOL):
    """Linear independence of the k^2 products A_i* A_j.

    Returns (independent, smallest_singular_value).  More than m^2
    products in an m^2-dimensional space are dependent outright.
    """
    k = len(kraus)
    if k * k > m * m:
        return False, 0.0
    cols = []
    for a in kraus:
        for b in kraus:
            cols.append(vec(a.conj().T @ b))
    c = np.column_stack(cols)
    rank, s, _ = svd_rank(c, tol)
    return rank == k * k, float(s[-1])


def nullspace_functional_test(channel: Channel):
    """Extremality via the kernel of the block-trace functionals.

    Requires choi_rank <= m (higher ranks are settled by the rank bound).
    Returns (extreme, TraceFunctionals).
    """
    k = channel.choi_rank
    if k > channel.m:
        raise PreconditionError(
            f"kernel test needs choi_rank <= m, got rank {k} > m = {channel.m}"
        )
    funcs = _trace_functionals(channel.range_basis(), channel.m, channel.n)
    rank, _, _ = svd_rank(funcs.matrix, channel.tol)
    return rank == k * k, funcs


@dataclass(frozen=True)
class ExtremalityVerdict:
    """Decision plus witness data and conditioning diagnostics.

    When ``extreme`` is false and ``rank_exceeds_m`` is false, ``witness``
    is a unit-Frobenius Hermitian matrix with all block traces zero whose
    range lies inside the range of the Choi matrix; ``split`` is the
    convex decomposition built from it.
    """

    extreme: bool
    method_agreement: bool
    rank_exceeds_m: bool
    witness: np.ndarray | None
    split: tuple | None  # (Channel, Channel, weight of the first part)
    conditioning_flag: bool


def _witness_from_kernel(channel: Channel, funcs: TraceFunctionals) -> np.ndarray:
    """Unit-Frobenius kernel element of the functional matrix, mapped back
    to a Hermitian perturbation supported on the Choi range.

    The kernel vector is the first right-singular vector (in the fixed SVD
    ordering) whose singular value falls below the rank threshold.
    """
    f = funcs.matrix
    _, s, vh = np.linalg.svd(f)
    thr = channel.tol.rank_threshold(max(f.shape), float(s[0]) if s.size else 0.0)
    k2 = f.shape[1]
    kernel_start = None
    for idx in range(k2):
        sval = s[idx] if idx < s.size else 0.0
        if sval <= thr:
            kernel_start = idx
            break
    if kernel_start is None:
        raise InvalidWitnessError("functional matrix has trivial kernel")
    coeffs = vh[kernel_start]
    h = _basis_combination(coeffs, funcs.k)
    p = channel.range_basis()
    w = p @ h @ p.conj().T
    w = (w + w.conj().T) / 2
    return w / np.linalg.norm(w)


def convex_split(channel: Channel, witness: np.ndarray):
    """Split a channel along a witness direction.

    The witness W must be Hermitian, nonzero, have all block traces zero,
    and range contained in the range of the Choi matrix Z.  Restricted to
    that range, S = R^{-1/2} (P* W P) R^{-1/2} with R = P* Z P has
    eigenvalues of both signs; Z + W / |min eig S| and Z - W / max eig S
    are the extreme feasible steps, where the rank drops.  Returns
    (L1, L2, t) with t Z(L1) + (1 - t) Z(L2) = Z and both ranks strictly
    below choi_rank.
    """
    tol = channel.tol
    w = hermitize(witness, tol)
    norm_w = float(np.linalg.norm(w))
    if norm_w == 0.0:
        raise InvalidWitnessError("witness must be nonzero")
    bt = float(np.abs(block_traces(w, channel.m, channel.n)).max())
    if bt > 1e-8 * max(1.0, norm_w):
        raise InvalidWitnessError(
            f"witness violates the zero block-trace conditions (residual {bt:.3e})"
        )
    p = channel.range_basis()
    outside = float(np.linalg.norm(w - p @ (p.conj().T @ w @ p) @ p.conj().T))
    if outside > 1e-8 * norm_w:
        raise InvalidWitnessError(
            f"witness range escapes the Choi range (residual {outside:.3e})"
        )

    r = hermitize(p.conj().T @ channel.choi @ p, tol)
    r_inv_sqrt = psd_sqrt(r, inverse=True, tol=tol)
    s_mat = hermitize(r_inv_sqrt @ (p.conj().T @ w @ p) @ r_inv_sqrt, tol)
    mu = np.linalg.eigvalsh(s_mat)
    mu_min, mu_max = float(mu[0]), float(mu[-1])
    if mu_min >= -1e-13 or mu_max <= 1e-13:
        raise InvalidWitnessError(
            "witness does not generate a two-sided feasible perturbation"
        )
    t1 = 1.0 / abs(mu_min)
    t2 = 1.0 / mu_max
    l1 = Channel.from_choi(channel.choi + t1 * w, channel.m, channel.n, tol=tol)
    l2 = Channel.from_choi(channel.choi - t2 * w, channel.m, channel.n, tol=tol)
    return l1, l2, t2 / (t1 + t2)


def is_extreme(channel: Channel) -> ExtremalityVerdict:
    """Full extremality decision with witness and split for the negative case.

    The verdict follows the kernel test; the independence test runs as a
    cross-check and ``method_agreement`` records whether they coincide.
    ``conditioning_flag`` is set when any Choi eigenvalue, functional
    singular value, or product-Gram singular value sits within a factor 10
    of its rank threshold, i.e. when a rank decision is fragile.
    """
    tol = channel.tol
    m, k = channel.m, channel.choi_rank
    eig = channel.eigen
    flag = values_near_threshold(eig.eigenvalues, eig.rank_threshold)

    independent, gram_min = kraus_product_independence(channel.kraus, m, tol)
    if len(channel.kraus) ** 2 <= m * m:
        cols = [vec(a.conj().T @ b) for a in channel.kraus for b in channel.kraus]
        _, s_gram, thr_gram = svd_rank(np.column_stack(cols), tol)
        flag = flag or values_near_threshold(s_gram, thr_gram)

    funcs = _trace_functionals(channel.range_basis(), m, channel.n)
    rank_f, s_f, thr_f = svd_rank(funcs.matrix, tol)
    flag = flag or values_near_threshold(s_f, thr_f)
    extreme_kernel = rank_f == k * k

    if k > m:
        witness = _witness_from_kernel(channel, funcs)
        split = convex_split(channel, witness)
        return ExtremalityVerdict(
            extreme=False,
            method_agreement=not independent,
            rank_exceeds_m=True,
            witness=witness,
            split=split,
            conditioning_flag=flag,
        )

    witness = None
    split = None
    if not extreme_kernel:
        witness = _witness_from_kernel(channel, funcs)
        split = convex_split(channel, witness)
    return ExtremalityVerdict(
        extreme=extreme_kernel,
        method_agreement=extreme_kernel == independent,
        rank_exceeds_m=False,
        witness=witness,
        split=split,
        conditioning_flag=flag,
    )


def decomposable_nonextreme_check(l1: Channel, l2: Channel):
    """Sufficient conditions for the direct sum of two channels to be
    non-extreme.

    Returns (True, condition) when one holds, with condition 3 for the
    rank product rank(Z1) * rank(Z2) > p * q (checked first, it is cheap),
    condition 1 for l1 non-extreme, condition 2 for l2 non-extreme.
    (False, None) means none of the conditions applies, which is not a
    claim of extremality.
    """
    if l1.n != l2.n:
        raise PreconditionError("direct summands must share the output dimension")
    if l1.choi_rank * l2.choi_rank > l1.m * l2.m:
        return True, 3
    if not is_extreme(l1).extreme:
        return True, 1
    if not is_extreme(l2).extreme:
        return True, 2
    return False, None
