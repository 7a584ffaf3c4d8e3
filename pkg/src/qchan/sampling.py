"""Seeded random generation of unitaries and channels.

The generator is counter-based (numpy Philox): the stream for sample i of
a run is keyed by ``seed XOR i``, so samples are independent of evaluation
order and identical configurations reproduce bit-identical streams.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import Channel
from .errors import NumericalFailureError
from .linalg import DEFAULT_TOL, TolerancePolicy, psd_sqrt

_MASK64 = (1 << 64) - 1


def min_choi_rank(m: int, n: int) -> int:
    """Smallest Choi rank a channel from m to n can have: ceil(m / min(m, n))."""
    if m < 1 or n < 1:
        raise ValueError("dimensions must be positive")
    return -(-m // min(m, n))


def sample_stream(seed: int, index: int = 0) -> np.random.Generator:
    """Deterministic per-sample generator keyed by seed XOR index."""
    key = (int(seed) ^ int(index)) & _MASK64
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class SamplerConfig:
    """Dimensions, target Choi rank, and seeding for a sampling run."""

    seed: int
    m: int
    n: int
    k: int
    count: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be at least 1")
        if self.k * min(self.m, self.n) < self.m:
            raise ValueError(
                f"no channel from {self.m} to {self.n} has Choi rank {self.k}: "
                f"k * min(m, n) >= m requires k >= {min_choi_rank(self.m, self.n)}"
            )


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix with the
    phase of the R diagonal absorbed."""
    if dim < 1:
        raise ValueError("dim must be positive")
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(a / np.sqrt(2.0))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def _gaussian_kraus(m: int, n: int, k: int, rng: np.random.Generator):
    bs = [
        (rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))) / np.sqrt(2.0)
        for _ in range(k)
    ]
    d = sum(b.conj().T @ b for b in bs)
    f_inv = psd_sqrt(d, inverse=True)
    return [b @ f_inv for b in bs]


def random_channel(
    cfg: SamplerConfig,
    index: int = 0,
    tol: TolerancePolicy = DEFAULT_TOL,
) -> Channel:
    """Random channel of prescribed dimensions and Choi rank.

    k independent complex Gaussian matrices are normalized through the
    inverse square root of their Gram sum, giving a trace-preserving Kraus
    set whose Choi rank is k with probability one; the measure-zero
    failure is retried up to three times.
    """
    rng = sample_stream(cfg.seed, index)
    for _ in range(4):
        ops = _gaussian_kraus(cfg.m, cfg.n, cfg.k, rng)
        ch = Channel.from_kraus(ops, tol=tol)
        if ch.choi_rank == cfg.k:
            return ch
    raise NumericalFailureError(
        f"sampled channel never reached Choi rank {cfg.k} after retries"
    )


@dataclass(frozen=True)
class ExperimentResult:
    fraction_extreme: float
    flagged: int
    count: int
    seed: int
    m: int
    n: int
    k: int

    def csv_row(self) -> str:
        return (
            f"{self.seed},{self.m},{self.n},{self.k},{self.count},"
            f"{self.fraction_extreme},{self.flagged}"
        )


CSV_HEADER = "seed,m,n,k,count,fraction_extreme,flagged"


def extreme_fraction_experiment(
    cfg: SamplerConfig,
    threads: int | None = None,
    tol: TolerancePolicy = DEFAULT_TOL,
) -> ExperimentResult:
    """Sample channels and report the fraction of extreme points among the
    conditioning-unflagged verdicts.

    Per-sample streams make the result independent of evaluation order, so
    the thread count never changes the outcome.
    """
    from .extremality import is_extreme

    def one(index: int):
        ch = random_channel(cfg, index, tol=tol)
        verdict = is_extreme(ch)
        return verdict.extreme, verdict.conditioning_flag

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(one, range(cfg.count)))
    else:
        outcomes = [one(i) for i in range(cfg.count)]

    flagged = sum(1 for _, f in outcomes if f)
    clean = [e for e, f in outcomes if not f]
    fraction = sum(clean) / len(clean) if clean else float("nan")
    return ExperimentResult(
        fraction_extreme=fraction,
        flagged=flagged,
        count=cfg.count,
        seed=cfg.seed,
        m=cfg.m,
        n=cfg.n,
        k=cfg.k,
    )
