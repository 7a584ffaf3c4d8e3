"""Canonical forms and complete extremality classification for channels
from qubits to qubits and from qutrits to qubits.

Both classifications start from a pure input state mapped to a pure
output state (always available at these dimensions) and rotate input and
output bases so that e_1 e_1* maps to e_1 e_1*.  The Choi matrix then
takes a sparse normal form whose scalar parameters decide everything.

For the 3 -> 2 case the decision reduces to an auxiliary completely
positive map M on 2 x 2 matrices with block traces (1, t, 0), plus,
when M is extreme, a feasibility question: do two rank-one matrices
built from a pair (z, w) fit simultaneously under the reduced Choi
matrix?  Writing u = y g4 + p with p = z g2 + w g4, the two constraints
read Z2 >= (y g4 + p)(y g4 + p)* and Z2 >= (y g4 - p)(y g4 - p)*; on the
admissible subspace they become max of two convex quadratics whose value
at p = 0 is c0 = |y|^2 g4* Z2^+ g4, and the max only grows with p.  The
pair therefore exists for some p != 0 exactly when p can live in
range(Z2), g4 lies in range(Z2) (needed for y != 0), and c0 < 1; the
returned witness sits on the feasibility boundary, where the perturbed
matrices drop rank.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import extremality
from .channel import Channel
from .errors import NumericalFailureError, PreconditionError, ShapeError
from .image_rank import PureSearchConfig, find_pure_to_pure
from .linalg import DEFAULT_TOL, TolerancePolicy, herm_eig, hermitize
from .extremality import _trace_functionals
from .linalg import svd_rank

ZTOL = 1e-8
X_ELIM_TOL = 1e-10


def unitary_with_first_column(x: np.ndarray) -> np.ndarray:
    """Deterministic unitary whose first column is the given unit vector."""
    x = np.asarray(x, dtype=complex).reshape(-1)
    x = x / np.linalg.norm(x)
    d = x.size
    drop = int(np.argmax(np.abs(x)))
    cols = [x] + [np.eye(d, dtype=complex)[:, j] for j in range(d) if j != drop]
    q, r = np.linalg.qr(np.column_stack(cols))
    q = q.copy()
    q[:, 0] = q[:, 0] * (r[0, 0] / abs(r[0, 0]))
    return q


def conjugate_choi(z: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Choi matrix of X -> V* L(U X U*) V given the Choi matrix of L."""
    t = np.kron(u.T, v.conj().T)
    out = t @ z @ t.conj().T
    return (out + out.conj().T) / 2


def _top_eigvec(state: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh((state + state.conj().T) / 2)
    vec_ = v[:, -1]
    idx = int(np.argmax(np.abs(vec_)))
    piv = vec_[idx]
    return vec_ * (piv.conjugate() / abs(piv))


# ---------------------------------------------------------------------------
# qubit-to-qubit channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalForm22:
    """Normal form of a rank-2 qubit channel.

    After the basis changes the Choi matrix is determined by (y, c, s)
    with row and column 2 zero, unit (1,1) entry, y at (1,4), s at (3,4),
    and diagonal (1, 0, 1-c, c); rank 2 forces
    (1-c)(c - |y|^2) = |s|^2 up to ``residual``.
    """

    u: np.ndarray
    v: np.ndarray
    y: complex
    c: float
    s: complex
    residual: float
    choi_canonical: np.ndarray


class ImageCase(str, enum.Enum):
    SINGLE_POINT = "single_point"
    INTERVAL = "interval"
    TWO_PURE = "two_pure_strict"
    ONE_PURE = "one_pure"


@dataclass(frozen=True)
class ImageClass22:
    case: ImageCase
    pure_outputs: tuple[np.ndarray, ...]


def canonical_form_22(
    channel: Channel,
    cfg: PureSearchConfig | None = None,
) -> CanonicalForm22:
    if channel.m != 2 or channel.n != 2:
        raise PreconditionError("canonical_form_22 requires a 2 -> 2 channel")
    if channel.choi_rank != 2:
        raise PreconditionError(
            f"canonical_form_22 requires Choi rank 2, got {channel.choi_rank}"
        )
    pp = find_pure_to_pure(channel, cfg)
    if not pp.converged:
        raise NumericalFailureError("pure-to-pure search did not converge")
    u = unitary_with_first_column(pp.x)
    v = unitary_with_first_column(_top_eigvec(pp.output))
    zc = conjugate_choi(channel.choi, u, v)
    _check_canonical_head(zc)
    y = complex(zc[0, 3])
    c = float(zc[3, 3].real)
    s = complex(zc[2, 3])
    residual = abs((1 - c) * (c - abs(y) ** 2) - abs(s) ** 2)
    return CanonicalForm22(u=u, v=v, y=y, c=c, s=s, residual=residual, choi_canonical=zc)


def _check_canonical_head(zc: np.ndarray) -> None:
    """Sanity of the fixed part of a canonical Choi matrix: unit corner and
    zero second row (the image of e_1 e_1* is exactly e_1 e_1*)."""
    if abs(zc[0, 0] - 1) > 1e-6 or np.abs(zc[1, :]).max() > 1e-6:
        raise NumericalFailureError("canonical form lost the pure-to-pure corner")


def classify_image_22(form: CanonicalForm22) -> ImageClass22:
    """Image geometry of a rank-2 qubit channel from its normal form.

    The image of the state set contains either a single point, an
    interval between two pure states, exactly two pure states with more
    in between, or exactly one pure state.
    """
    v = form.v
    r1 = np.outer(v[:, 0], v[:, 0].conj())
    block22 = np.array(
        [[1 - form.c, form.s], [np.conj(form.s), form.c]], dtype=complex
    )
    if abs(form.y) <= ZTOL:
        if form.c <= ZTOL:
            return ImageClass22(ImageCase.SINGLE_POINT, (r1,))
        r2 = v @ block22 @ v.conj().T
        return ImageClass22(ImageCase.INTERVAL, (r1, r2))
    if form.c >= 1 - ZTOL:
        r2 = np.outer(v[:, 1], v[:, 1].conj())
        return ImageClass22(ImageCase.TWO_PURE, (r1, r2))
    if abs(form.s) <= ZTOL:
        return ImageClass22(ImageCase.ONE_PURE, (r1,))
    # second pure output at the unique admissible input direction
    wp = form.s / (form.y * (1 - form.c))
    vv = 1.0 / np.sqrt(1.0 + abs(wp) ** 2)
    b = np.array([vv, np.conj(wp * vv)], dtype=complex)
    zc = form.choi_canonical
    x4 = np.kron(np.outer(b, b.conj()), np.eye(2)).conj()  # not used; direct apply below
    del x4
    # evaluate the canonical channel at bb* through its Choi blocks
    bb = np.outer(b, b.conj())
    out = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for j in range(2):
            out += bb[i, j] * zc[2 * i : 2 * i + 2, 2 * j : 2 * j + 2]
    r2 = v @ out @ v.conj().T
    return ImageClass22(ImageCase.TWO_PURE, (r1, r2))


def is_extreme_22(channel: Channel) -> extremality.ExtremalityVerdict:
    """Extremality for qubit channels, with the structural consistency
    check that a non-unital rank-2 channel must be extreme."""
    if channel.m != 2 or channel.n != 2:
        raise PreconditionError("is_extreme_22 requires a 2 -> 2 channel")
    verdict = extremality.is_extreme(channel)
    if channel.choi_rank == 2 and not channel.is_unital and not verdict.extreme:
        raise NumericalFailureError(
            "non-unital rank-2 qubit channel decided non-extreme; "
            "rank decisions are inconsistent"
        )
    return verdict


# ---------------------------------------------------------------------------
# the auxiliary family: CP maps on qubits with block traces (1, t, 0)
# ---------------------------------------------------------------------------


def is_extreme_mt(z: np.ndarray, t: float, tol: TolerancePolicy = DEFAULT_TOL) -> bool:
    """Extremality of a member of the compact convex family of completely
    positive qubit maps with block traces (1, t, 0), t in (0, 1].

    Rank 1 members are extreme; rank >= 3 never are; rank 2 reduces to
    the same block-trace kernel test as for channels, since the family
    differs from the channel set only in affine constants.
    """
    if not 0 < t <= 1:
        raise ValueError(f"t must lie in (0, 1], got {t}")
    z = hermitize(np.asarray(z, dtype=complex), tol)
    if z.shape != (4, 4):
        raise ShapeError("member must be a 4x4 Choi matrix")
    e = herm_eig(z, tol, assume_hermitian=True)
    if not e.is_psd:
        raise ValueError(
            f"member is not completely positive (min eigenvalue {e.min_eigenvalue:.3e})"
        )
    traces = np.array(
        [z[0, 0] + z[1, 1], z[2, 2] + z[3, 3], z[0, 2] + z[1, 3]], dtype=complex
    )
    target = np.array([1.0, t, 0.0])
    if np.abs(traces - target).max() > 1e-8:
        raise ValueError("block traces do not match (1, t, 0)")
    k = e.numeric_rank
    if k <= 1:
        return True
    if k >= 3:
        return False
    mask = np.abs(e.eigenvalues) > e.rank_threshold
    p = e.eigenvectors[:, mask]
    funcs = _trace_functionals(p, 2, 2)
    rank, _, _ = svd_rank(funcs.matrix, tol)
    return rank == k * k


# ---------------------------------------------------------------------------
# qutrit-to-qubit channels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CanonicalForm32:
    """Normal form of a 3 -> 2 channel of Choi rank 2 or 3.

    The 6x6 canonical Choi matrix has a unit (1,1) entry, zero second row
    and column, zero (1,4) entry (eliminated by an extra input rotation
    when needed), y real nonnegative at (1,6), and the reduced 4x4 matrix
    z2 = choi_canonical[2:, 2:] carrying the remaining parameters.
    """

    u: np.ndarray
    v: np.ndarray
    y: complex
    c: float
    s: complex
    a: complex
    b: complex
    d: complex
    e: float
    f: complex
    x_eliminated: bool
    choi_canonical: np.ndarray

    @property
    def z2(self) -> np.ndarray:
        return self.choi_canonical[2:, 2:]


def canonical_form_32(
    channel: Channel,
    cfg: PureSearchConfig | None = None,
) -> CanonicalForm32:
    if channel.m != 3 or channel.n != 2:
        raise PreconditionError("canonical_form_32 requires a 3 -> 2 channel")
    if channel.choi_rank not in (2, 3):
        raise PreconditionError(
            f"canonical_form_32 requires Choi rank 2 or 3, got {channel.choi_rank}"
        )
    pp = find_pure_to_pure(channel, cfg)
    if not pp.converged:
        raise NumericalFailureError("pure-to-pure search did not converge")
    u = unitary_with_first_column(pp.x)
    v = unitary_with_first_column(_top_eigvec(pp.output))
    zc = conjugate_choi(channel.choi, u, v)
    _check_canonical_head(zc)

    x_eliminated = False
    x_entry = complex(zc[0, 3])
    y_entry = complex(zc[0, 5])
    if abs(x_entry) > X_ELIM_TOL:
        # rotate e2, e3 so the (1,4) entry vanishes: the direction
        # (-conj(y), conj(x)) in the e2-e3 plane is annihilated against e1
        wv = np.array([0.0, -np.conj(y_entry), np.conj(x_entry)], dtype=complex)
        wv = wv / np.linalg.norm(wv)
        e3 = np.array([0.0, -np.conj(wv[2]), np.conj(wv[1])], dtype=complex)
        u2 = np.column_stack([np.eye(3, dtype=complex)[:, 0], wv, e3])
        zc = conjugate_choi(zc, u2, np.eye(2, dtype=complex))
        u = u @ u2
        x_eliminated = True
        if abs(zc[0, 3]) > X_ELIM_TOL:
            raise NumericalFailureError("input rotation failed to clear the (1,4) entry")

    y_entry = complex(zc[0, 5])
    if abs(y_entry) > 1e-14 and abs(np.angle(y_entry)) > 1e-14:
        # absorb the phase of y into e3
        u3 = np.diag([1.0, 1.0, np.exp(1j * np.angle(y_entry))]).astype(complex)
        zc = conjugate_choi(zc, u3, np.eye(2, dtype=complex))
        u = u @ u3

    y = complex(zc[0, 5])
    form = CanonicalForm32(
        u=u,
        v=v,
        y=y,
        c=float(zc[3, 3].real),
        s=complex(zc[2, 3]),
        a=complex(zc[2, 4]),
        b=complex(zc[2, 5]),
        d=complex(zc[3, 4]),
        e=float(zc[5, 5].real),
        f=complex(zc[4, 5]),
        x_eliminated=x_eliminated,
        choi_canonical=zc,
    )
    n_mat = form.z2.copy()
    n_mat[3, 3] -= abs(y) ** 2
    n_min = float(np.linalg.eigvalsh(hermitize(n_mat, channel.tol)).min())
    if n_min < -channel.tol.psd_tol * 10:
        raise NumericalFailureError(
            f"reduced matrix lost positive semidefiniteness ({n_min:.3e})"
        )
    return form


class Case32(str, enum.Enum):
    Y1_W22_RANK1 = "y_one_w22_rank_one"
    Y1_W22_RANK2 = "y_one_w22_rank_two"
    RANK_M1 = "rank_m_one"
    M_NONEXTREME = "m_nonextreme"
    Y0_RANGE = "y_zero_range"
    YPOS_FEASIBLE = "y_pos_feasible"
    YPOS_INFEASIBLE = "y_pos_infeasible"


@dataclass(frozen=True)
class W22Decomposition:
    """Rank-one split of the trailing diagonal block in the |y| = 1 case."""

    state_a: np.ndarray
    state_b: np.ndarray
    weight: float
    channels: tuple[Channel, Channel]


@dataclass(frozen=True)
class Verdict32:
    extreme: bool
    case_tag: Case32
    witness: object | None
    general_agreement: bool


def split_pair_feasibility(
    z2: np.ndarray,
    y: complex,
    tol: TolerancePolicy = DEFAULT_TOL,
):
    """Witness (z, w) != 0 with Z2 >= u+ u+* and Z2 >= u- u-*, where
    u+- = +-z g2 + (y +- w) g4, or None when no witness exists.

    Decided in closed form (see the module docstring): writing the free
    part as p = z g2 + w g4, feasibility holds iff p can be chosen nonzero
    inside range(Z2), g4 lies in range(Z2) whenever y != 0, and
    c0 = |y|^2 g4* Z2^+ g4 < 1.  The returned witness maximizes the norm
    of p subject to both constraints, so it sits on the boundary where
    the two perturbed matrices drop rank.
    """
    z2 = hermitize(np.asarray(z2, dtype=complex), tol)
    if z2.shape != (4, 4):
        raise ShapeError("reduced Choi matrix must be 4x4")
    e = herm_eig(z2, tol, assume_hermitian=True)
    mask = np.abs(e.eigenvalues) > e.rank_threshold
    p_basis = e.eigenvectors[:, mask]
    lam = e.eigenvalues[mask]

    g2 = np.zeros(4, dtype=complex)
    g2[1] = 1.0
    g4 = np.zeros(4, dtype=complex)
    g4[3] = 1.0
    y = complex(y)

    if abs(y) > 0:
        resid = np.linalg.norm(g4 - p_basis @ (p_basis.conj().T @ g4))
        if resid > tol.search_tol:
            return None

    g_mat = np.column_stack([g2, g4])
    defect = g_mat - p_basis @ (p_basis.conj().T @ g_mat)
    _, s_def, vh_def = np.linalg.svd(defect)
    kernel = [vh_def[i].conj() for i in range(2) if s_def[i] <= tol.search_tol]
    if not kernel:
        return None
    c_mat = np.column_stack(kernel)  # 2 x d, orthonormal columns
    d = c_mat.shape[1]

    def pinv_apply(vecs: np.ndarray) -> np.ndarray:
        return p_basis @ ((p_basis.conj().T @ vecs) / lam[:, None])

    c0 = float(abs(y) ** 2 * np.real(g4.conj() @ pinv_apply(g4[:, None])[:, 0]))
    if c0 >= 1 - 1e-9:
        return None

    gc = g_mat @ c_mat  # 4 x d, orthonormal columns inside range(Z2)
    zp_gc = pinv_apply(gc)
    q = gc.conj().T @ zp_gc
    h = (gc.conj().T @ pinv_apply((y * g4)[:, None]))[:, 0]

    x_part, y_part = np.real(q), np.imag(q)
    q_r = np.block([[x_part, -y_part], [y_part, x_part]])
    h_r = np.concatenate([np.real(h), np.imag(h)])

    if np.linalg.norm(h_r) <= 1e-14:
        k_basis = np.eye(2 * d)
    else:
        _, _, vh = np.linalg.svd(h_r.reshape(1, -1))
        k_basis = vh[1:].T
    a_mat = k_basis.T @ q_r @ k_basis
    mu, xi = np.linalg.eigh((a_mat + a_mat.T) / 2)
    mu0 = float(mu[0])
    if mu0 <= 0:
        raise NumericalFailureError("feasibility quadratic lost positivity")
    rho = k_basis @ xi[:, 0] * np.sqrt((1 - c0) / mu0)
    tau = rho[:d] + 1j * rho[d:]
    zw = c_mat @ tau
    z_val, w_val = complex(zw[0]), complex(zw[1])

    for sign in (+1.0, -1.0):
        uvec = sign * z_val * g2 + (y + sign * w_val) * g4
        margin = float(np.linalg.eigvalsh(z2 - np.outer(uvec, uvec.conj())).min())
        if margin < -max(tol.psd_tol, 1e-9):
            raise NumericalFailureError(
                f"feasibility witness failed its PSD certificate ({margin:.3e})"
            )
    return z_val, w_val


def _case1_structure_check(form: CanonicalForm32) -> None:
    # with |y| = 1, positivity of the reduced matrix forces e = 1 and kills
    # the couplings; tolerances follow from sqrt(1 - e) scaling
    if abs(form.e - 1) > 1e-6:
        raise NumericalFailureError("case |y| = 1 routed with e != 1")
    for name, val in (("a", form.a), ("b", form.b), ("d", form.d), ("f", form.f)):
        if abs(val) > 1e-3:
            raise NumericalFailureError(f"case |y| = 1 routed with {name} != 0")


def _w22_split(channel: Channel, form: CanonicalForm32) -> W22Decomposition:
    """Split through the rank-2 trailing block in the |y| = 1 case."""
    zc = form.choi_canonical
    w22 = hermitize(zc[2:4, 2:4], channel.tol)
    w, vecs = np.linalg.eigh(w22)
    state_a = np.outer(vecs[:, 1], vecs[:, 1].conj())
    state_b = np.outer(vecs[:, 0], vecs[:, 0].conj())
    weight = float(w[1])
    h = np.zeros(6, dtype=complex)
    h[0] = 1.0
    h[5] = np.conj(form.y)
    base = np.outer(h, h.conj())
    parts = []
    t_mat = np.kron(form.u.T, form.v.conj().T)
    for state in (state_a, state_b):
        z_can = base.copy()
        z_can[2:4, 2:4] += state
        z_orig = t_mat.conj().T @ z_can @ t_mat
        parts.append(Channel.from_choi(z_orig, 3, 2, tol=channel.tol))
    return W22Decomposition(
        state_a=state_a,
        state_b=state_b,
        weight=weight,
        channels=(parts[0], parts[1]),
    )


def is_extreme_32(
    channel: Channel,
    cfg: PureSearchConfig | None = None,
) -> Verdict32:
    """Structural extremality decision for 3 -> 2 channels, cross-checked
    against the general criteria.

    Choi rank 2 is the minimal feasible rank, hence extreme.  At rank 3
    the canonical form decides: |y| = 1 reduces to the rank of the trailing
    diagonal block; |y| < 1 reduces to the auxiliary map M with Choi
    matrix z2 - |y|^2 g4 g4^T in the family with block traces
    (1, 1 - |y|^2, 0), and when M is extreme to the paired rank-one
    feasibility problem (its y = 0 specialization is the range question
    for z2 over span{g2, g4}).
    """
    if channel.m != 3 or channel.n != 2:
        raise PreconditionError("is_extreme_32 requires a 3 -> 2 channel")
    if channel.choi_rank not in (2, 3):
        raise PreconditionError(
            f"is_extreme_32 requires Choi rank 2 or 3, got {channel.choi_rank}"
        )
    general = extremality.is_extreme(channel)

    if channel.choi_rank == 2:
        return Verdict32(
            extreme=True,
            case_tag=Case32.RANK_M1,
            witness=None,
            general_agreement=general.extreme is True,
        )

    form = canonical_form_32(channel, cfg)
    y_abs = abs(form.y)

    if abs(y_abs - 1) <= ZTOL:
        _case1_structure_check(form)
        w22 = hermitize(form.choi_canonical[2:4, 2:4], channel.tol)
        rank_w22 = herm_eig(w22, channel.tol, assume_hermitian=True).numeric_rank
        if rank_w22 <= 1:
            return Verdict32(
                extreme=True,
                case_tag=Case32.Y1_W22_RANK1,
                witness=None,
                general_agreement=general.extreme is True,
            )
        witness = _w22_split(channel, form)
        return Verdict32(
            extreme=False,
            case_tag=Case32.Y1_W22_RANK2,
            witness=witness,
            general_agreement=general.extreme is False,
        )

    t = 1 - y_abs**2
    z2 = form.z2
    n_mat = z2.copy()
    n_mat[3, 3] -= y_abs**2
    n_mat = hermitize(n_mat, channel.tol)
    rank_n = herm_eig(n_mat, channel.tol, assume_hermitian=True).numeric_rank
    if rank_n <= 1:
        return Verdict32(
            extreme=True,
            case_tag=Case32.RANK_M1,
            witness=None,
            general_agreement=general.extreme is True,
        )
    if rank_n >= 3 or not is_extreme_mt(n_mat, t, channel.tol):
        return Verdict32(
            extreme=False,
            case_tag=Case32.M_NONEXTREME,
            witness=None,
            general_agreement=general.extreme is False,
        )

    zw = split_pair_feasibility(z2, form.y, channel.tol)
    if y_abs <= ZTOL:
        extreme = zw is None
        tag = Case32.Y0_RANGE
    else:
        extreme = zw is None
        tag = Case32.YPOS_INFEASIBLE if zw is None else Case32.YPOS_FEASIBLE
    return Verdict32(
        extreme=extreme,
        case_tag=tag,
        witness=zw,
        general_agreement=general.extreme is extreme,
    )
