"""Output-rank structure of a channel and the pure-to-pure search.

For a channel with canonical Kraus operators A_1..A_l, the image of a
pure state xx* factors as L(xx*) = M(x) M(x)* with
M(x) = [A_1 x ... A_l x], and M(x) = sum_i x_i B_i where
B_j = [A_1 e_j ... A_l e_j].  The rank of the output therefore equals the
rank of the linear pencil M(x), and the span dimension
r = dim span{B_1..B_m} controls which output ranks are guaranteed to be
attained: the smallest p with p(n + l - p) + r >= n*l + 1 always is.

For qubit outputs (n = 2) and l <= m a pure input with pure output always
exists, and the search below finds it exactly: a unit y in C^2 kills the
output column space iff x lies in the kernel of the l x m matrix G(y)
with rows y* A_i, and G(y) is a linear pencil in conj(y) on the
projective line, so rank deficiency reduces to scalar root finding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Channel
from .errors import NumericalFailureError, PreconditionError
from .linalg import svd_rank
from .sampling import sample_stream


@dataclass(frozen=True)
class ImageRankReport:
    """Guaranteed-output-rank data of a channel."""

    l: int
    b_mats: tuple[np.ndarray, ...]
    r: int
    p: int
    rank_one_guaranteed: bool


@dataclass(frozen=True)
class PureSearchConfig:
    seed: int = 0
    starts: int = 32
    iters: int = 500


@dataclass(frozen=True)
class PureToPureResult:
    x: np.ndarray
    output: np.ndarray
    sigma2: float
    purity_defect: float
    converged: bool


def coefficient_matrices(channel: Channel) -> tuple[np.ndarray, ...]:
    """The B_j = [A_1 e_j ... A_l e_j], one n x l matrix per input index."""
    return tuple(
        np.stack([a[:, j] for a in channel.kraus], axis=1) for j in range(channel.m)
    )


def output_factor(channel: Channel, x: np.ndarray) -> np.ndarray:
    """M(x) = [A_1 x ... A_l x]; L(xx*) = M(x) M(x)*."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    if x.size != channel.m:
        raise PreconditionError(f"x must have length {channel.m}")
    return np.stack([a @ x for a in channel.kraus], axis=1)


def guaranteed_rank(n: int, l: int, r: int) -> int:
    """Smallest positive p with p(n + l - p) + r >= n*l + 1, at most min(n, l)."""
    cap = min(n, l)
    for p in range(1, cap + 1):
        if p * (n + l - p) + r >= n * l + 1:
            return p
    return cap


def image_rank_report(channel: Channel) -> ImageRankReport:
    b_mats = coefficient_matrices(channel)
    l = channel.choi_rank
    n = channel.n
    stacked = np.column_stack([b.reshape(-1) for b in b_mats])
    r, _, _ = svd_rank(stacked, channel.tol)
    p = guaranteed_rank(n, l, r)
    return ImageRankReport(
        l=l,
        b_mats=b_mats,
        r=r,
        p=p,
        rank_one_guaranteed=r >= (n - 1) * (l - 1) + 1,
    )


def output_rank(channel: Channel, x: np.ndarray) -> int:
    """Numeric rank of L(xx*), cross-checked against rank M(x)."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    nrm = np.linalg.norm(x)
    if abs(nrm - 1.0) > 1e-8:
        raise PreconditionError("x must be a unit vector")
    mx = output_factor(channel, x)
    rank_m, _, _ = svd_rank(mx, channel.tol)
    out = channel.apply(np.outer(x, x.conj()))
    w = np.linalg.eigvalsh((out + out.conj().T) / 2)
    thr = channel.tol.rank_threshold(channel.n, float(np.abs(w).max()))
    rank_out = int((np.abs(w) > thr).sum())
    if rank_out != rank_m:
        raise NumericalFailureError(
            f"output rank {rank_out} disagrees with pencil rank {rank_m}"
        )
    return rank_out


def _phase_fix_vector(x: np.ndarray) -> np.ndarray:
    idx = int(np.argmax(np.abs(x)))
    piv = x[idx]
    if abs(piv) == 0.0:
        return x
    return x * (piv.conjugate() / abs(piv))


def _sigma(channel: Channel, x: np.ndarray, p: int = 1) -> float:
    """Singular value p+1 of M(x); zero when M(x) has fewer singular values."""
    s = np.linalg.svd(output_factor(channel, x), compute_uv=False)
    return float(s[p]) if s.size > p else 0.0


def _row_pencil(kraus) -> tuple[np.ndarray, np.ndarray]:
    """R_a stacks row a of every Kraus operator; G(y) = c1 R1 + c2 R2 with
    c = conj(y)."""
    r1 = np.stack([a[0, :] for a in kraus])
    r2 = np.stack([a[1, :] for a in kraus])
    return r1, r2


def _kernel_candidate(r1, r2, c) -> np.ndarray:
    g = c[0] * r1 + c[1] * r2
    _, _, vh = np.linalg.svd(g)
    return vh[-1].conj()


def _candidates_exact(channel: Channel) -> list[np.ndarray]:
    """Exact pure-to-pure candidates for n = 2, l <= m."""
    m, l = channel.m, channel.choi_rank
    kraus = channel.kraus
    cands = [np.eye(m, dtype=complex)[:, j] for j in range(m)]
    r1, r2 = _row_pencil(kraus)

    if l == 1:
        return cands

    if l == 2 and m == 2:
        # det(x1 B1 + x2 B2) = a x1^2 + b x1 x2 + c x2^2 solved for x2/x1
        b1 = np.stack([a[:, 0] for a in kraus], axis=1)
        b2 = np.stack([a[:, 1] for a in kraus], axis=1)
        da = np.linalg.det(b1)
        dc = np.linalg.det(b2)
        db = np.linalg.det(b1 + b2) - da - dc
        coeffs = np.array([dc, db, da])
        scale = np.abs(coeffs).max()
        if scale > 0 and np.abs(coeffs[:2]).max() > 1e-14 * scale:
            for t in np.roots(coeffs):
                v = np.array([1.0, t], dtype=complex)
                cands.append(v / np.linalg.norm(v))
        if abs(dc) <= 1e-12 * max(1.0, scale):
            cands.append(np.array([0.0, 1.0], dtype=complex))
        return cands

    if l < m:
        # G(y) is l x m with l < m, so any output direction has a kernel.
        for c in (
            np.array([1.0, 0.0]),
            np.array([0.0, 1.0]),
            np.array([1.0, 1.0]) / np.sqrt(2),
            np.array([1.0, 1.0j]) / np.sqrt(2),
        ):
            cands.append(_kernel_candidate(r1, r2, c.astype(complex)))
        return cands

    # l == m: det(R1 + v R2) is a degree-m polynomial in v; interpolate its
    # coefficients at roots of unity and take all roots, plus v = infinity.
    deg = m
    nodes = np.exp(2j * np.pi * np.arange(deg + 1) / (deg + 1))
    vals = np.array([np.linalg.det(r1 + v * r2) for v in nodes])
    vander = np.vander(nodes, deg + 1, increasing=True)
    coeffs = np.linalg.solve(vander, vals)  # ascending powers of v
    scale = np.abs(coeffs).max()
    if scale <= 1e-13:
        # determinant vanishes identically: every output direction works
        for c in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
            cands.append(_kernel_candidate(r1, r2, c.astype(complex)))
        return cands
    poly_desc = coeffs[::-1]
    lead = np.abs(poly_desc[0])
    if lead > 1e-12 * scale:
        roots = np.roots(poly_desc)
    else:
        nz = np.nonzero(np.abs(poly_desc) > 1e-12 * scale)[0]
        roots = np.roots(poly_desc[nz[0]:]) if nz.size else np.array([])
        cands.append(_kernel_candidate(r1, r2, np.array([0.0, 1.0], complex)))
    for v in roots:
        c = np.array([1.0, v], dtype=complex)
        cands.append(_kernel_candidate(r1, r2, c / np.linalg.norm(c)))
    if abs(np.linalg.det(r2)) <= 1e-10 * max(1.0, scale):
        cands.append(_kernel_candidate(r1, r2, np.array([0.0, 1.0], complex)))
    return cands


def _alternating_search(channel: Channel, p: int, cfg: PureSearchConfig):
    """Multistart alternating minimization of the Frobenius mass of the
    trailing n - p output directions of M(x).

    Given x, the worst directions are the trailing left singular vectors
    of M(x); given those directions Y, the best x is the trailing right
    singular vector of the stack of Y* A_i.  Each step is a closed-form
    argmin, so the objective is nonincreasing; restarts guard against
    local minima.  Ties between starts break toward the lowest index.
    """
    m, n = channel.m, channel.n
    rng = sample_stream(cfg.seed)
    starts = [np.eye(m, dtype=complex)[:, j] for j in range(m)]
    for _ in range(cfg.starts):
        v = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        starts.append(v / np.linalg.norm(v))

    best = None
    for idx, x in enumerate(starts):
        x = x.copy()
        prev = np.inf
        for _ in range(cfg.iters):
            u, s, _ = np.linalg.svd(output_factor(channel, x))
            val = float(np.sqrt((s[p:] ** 2).sum())) if s.size > p else 0.0
            if val < 1e-14 or prev - val < 1e-15:
                prev = min(prev, val)
                break
            prev = val
            y = u[:, p:]
            g = np.vstack([y.conj().T @ a for a in channel.kraus])
            _, _, vh = np.linalg.svd(g)
            x = vh[-1].conj()
        sig = _sigma(channel, x, p)
        if best is None or sig < best[0]:
            best = (sig, idx, x)
    return best[2]


def find_pure_to_pure(
    channel: Channel,
    cfg: PureSearchConfig | None = None,
) -> PureToPureResult:
    """Unit input vector whose image under the channel is (numerically) a
    pure state.  Requires n = 2 and choi_rank <= m, where existence is
    guaranteed.

    Candidate inputs come from the exact reductions above (basis vectors
    first, then the root candidates); the first candidate at machine-level
    purity wins, which keeps already-canonical channels at the expected
    basis vector.  The multistart search is a fallback for degenerate
    pencils.
    """
    if channel.n != 2:
        raise PreconditionError("pure-to-pure search requires output dimension 2")
    if channel.choi_rank > channel.m:
        raise PreconditionError(
            "pure-to-pure search requires choi_rank <= m "
            f"(got {channel.choi_rank} > {channel.m})"
        )
    cfg = cfg or PureSearchConfig()

    best_x, best_sig = None, np.inf
    for x in _candidates_exact(channel):
        x = np.asarray(x, dtype=complex).reshape(-1)
        nrm = np.linalg.norm(x)
        if nrm < 1e-12:
            continue
        x = x / nrm
        sig = _sigma(channel, x)
        if sig <= 1e-12:
            best_x, best_sig = x, sig
            break
        if sig < best_sig:
            best_x, best_sig = x, sig

    tol = channel.tol.search_tol
    if best_sig > tol:
        x = _alternating_search(channel, 1, cfg)
        sig = _sigma(channel, x)
        if sig < best_sig:
            best_x, best_sig = x, sig

    x = _phase_fix_vector(best_x)
    out = channel.apply(np.outer(x, x.conj()))
    out = (out + out.conj().T) / 2
    purity_defect = float(1.0 - np.real(np.trace(out @ out)))
    return PureToPureResult(
        x=x,
        output=out,
        sigma2=best_sig,
        purity_defect=purity_defect,
        converged=best_sig <= tol,
    )


def find_low_rank_output(
    channel: Channel,
    p: int,
    cfg: PureSearchConfig | None = None,
):
    """Search for a unit x with rank L(xx*) <= p by multistart alternating
    minimization.  Experimental: a missing witness is not a proof of
    absence.  Returns (x, sigma_{p+1}(M(x)))."""
    if p < 1 or p >= min(channel.n, channel.choi_rank):
        raise PreconditionError("p must satisfy 1 <= p < min(n, choi_rank)")
    cfg = cfg or PureSearchConfig()
    x = _alternating_search(channel, p, cfg)
    x = _phase_fix_vector(x)
    return x, _sigma(channel, x, p)
