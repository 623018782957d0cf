"""
Stationary block bootstrap confidence intervals for relative efficiency.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict
from typing import List, Optional

import numpy as np
import structlog

from shared.errors import DataError, DegenerateBootstrapError, DomainError
from shared.evaluation import relative_efficiency

logger = structlog.get_logger()

MAX_ATTEMPT_FACTOR = 10


@dataclass(frozen=True)
class EfficiencyEstimate:
    point: float
    ci_low: float
    ci_high: float
    replicates: int
    mean_block_length: float
    level: float
    seed: int
    discarded: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def block_lengths(rng: np.random.Generator, count: int, mean_block_length: float) -> np.ndarray:
    """Geometric block lengths with the given mean; all ones when the mean is 1."""
    p = 1.0 / mean_block_length
    if p >= 1.0:
        return np.ones(count, dtype=np.int64)
    return rng.geometric(p, size=count)


def stationary_bootstrap_indices(n: int, mean_block_length: float, rng: np.random.Generator) -> np.ndarray:
    """
    One resample of positions 0..n-1.

    Blocks start at uniform positions, have geometric lengths and wrap around the
    end of the series; the concatenation is cut to n.
    """
    if n < 1:
        raise DataError("cannot resample an empty series")
    if not mean_block_length >= 1:
        raise DomainError(f"mean block length must be at least 1, got {mean_block_length}")
    starts = rng.integers(0, n, size=n)
    lengths = block_lengths(rng, n, mean_block_length)
    used = int(np.searchsorted(np.cumsum(lengths), n)) + 1
    starts, lengths = starts[:used], lengths[:used]
    offsets = np.arange(int(lengths.sum())) - np.repeat(np.cumsum(lengths) - lengths, lengths)
    return ((np.repeat(starts, lengths) + offsets) % n)[:n]


def _replicate_stream(seed: int, attempt: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))


def _log_ratio(e1: np.ndarray, e2: np.ndarray, seed: int, attempt: int, mean_block_length: float) -> Optional[float]:
    index = stationary_bootstrap_indices(e1.shape[0], mean_block_length, _replicate_stream(seed, attempt))
    mse1 = np.mean(e1[index] ** 2)
    mse2 = np.mean(e2[index] ** 2)
    if mse1 == 0 or mse2 == 0:
        return None
    return float(np.log(mse2 / mse1))


def stationary_bootstrap_ci(
    errors1,
    errors2,
    mean_block_length: float = 52.0,
    replicates: int = 10000,
    level: float = 0.95,
    seed: int = 0,
    threads: int = 1,
) -> EfficiencyEstimate:
    """
    Basic bootstrap interval for MSE(errors2) / MSE(errors1), built on the log scale.

    Both error series are resampled with the same indices so their dependence is kept.
    Replicates where either resampled MSE is zero are discarded and replaced by
    further draws, up to ten times the requested count in total. If the draws run out
    first, the interval is built from the usable replicates and a warning is logged.
    Replicate i always uses the stream SeedSequence(seed, spawn_key=(i,)), so the
    interval does not depend on `threads`.

    Raises:
        DegenerateBootstrapError: if no replicate is usable or the point estimate is
            zero.
    """
    e1 = np.asarray(errors1, dtype=float)
    e2 = np.asarray(errors2, dtype=float)
    if not 0 < level < 1:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    if replicates < 1:
        raise DomainError("at least one bootstrap replicate is required")
    if not mean_block_length >= 1:
        raise DomainError(f"mean block length must be at least 1, got {mean_block_length}")
    point = relative_efficiency(e1, e2)
    if point == 0:
        raise DegenerateBootstrapError("relative efficiency is zero; its log is undefined")
    n = e1.shape[0]
    if n < 2 * mean_block_length:
        logger.warning("Series is short for the block length", n=n, mean_block_length=mean_block_length)

    limit = MAX_ATTEMPT_FACTOR * replicates
    accepted: List[float] = []
    attempt = 0
    discarded = 0
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        while len(accepted) < replicates:
            batch = range(attempt, min(attempt + replicates - len(accepted), limit))
            if not batch:
                break
            run = lambda a: _log_ratio(e1, e2, seed, a, mean_block_length)
            results = list(pool.map(run, batch)) if pool else [run(a) for a in batch]
            for value in results:
                if value is None:
                    discarded += 1
                else:
                    accepted.append(value)
            attempt = batch.stop
    finally:
        if pool:
            pool.shutdown()
    if not accepted:
        raise DegenerateBootstrapError(f"no usable replicate in {limit} draws")
    if discarded:
        logger.warning("Discarded degenerate bootstrap replicates", discarded=discarded, replicates=replicates)
    if len(accepted) < replicates:
        logger.warning("Bootstrap ran short of usable replicates", usable=len(accepted), requested=replicates)

    theta = np.log(point)
    alpha = 1.0 - level
    q_low, q_high = np.quantile(np.asarray(accepted), [alpha / 2, 1 - alpha / 2])
    return EfficiencyEstimate(
        point=point,
        ci_low=float(np.exp(2 * theta - q_high)),
        ci_high=float(np.exp(2 * theta - q_low)),
        replicates=len(accepted),
        mean_block_length=float(mean_block_length),
        level=level,
        seed=seed,
        discarded=discarded,
    )
