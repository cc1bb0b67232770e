"""Nonparametric bootstrap percentile confidence intervals.

The corrected estimators chain several steps — share-of-coin-flippers
calibration, weight solving, a weighted fit — and each step carries
sampling noise.  Rather than propagate variances analytically, every
resample re-runs the caller's entire pipeline from scratch on rows
drawn with replacement, so the interval reflects the uncertainty of
the whole chain, calibration included.

Respondents are resampled jointly: a drawn row keeps its crosswise
answer, sub-sample label, control outcome, and completion time
together.  Stratified resampling (within each sub-sample, preserving
arm sizes) is available as an option but is not the default.

Each resample ``b`` uses its own RNG stream seeded by ``(seed, b)``, so
results are reproducible and independent of evaluation order.  The
interval bounds are the order statistics with 1-based ranks
``ceil(alpha/2 * B)`` and ``ceil((1 - alpha/2) * B)`` among the ``B``
successful resamples.  Resamples whose pipeline raises (degenerate
counts, unsolvable calibration) or returns a non-finite value are
excluded from the percentiles and counted; more than 10% of them
invalidates the interval outright.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CrosswiseError, NumericalError, ParameterError
from .records import RecordSet

__all__ = [
    "BootstrapConfig",
    "IntervalEstimate",
    "bootstrap_ci",
    "bootstrap_vector",
]

_MAX_FAILURE_SHARE = 0.1


@dataclass(frozen=True)
class BootstrapConfig:
    """How to resample: how often, at what level, from which seed."""

    n_resamples: int = 10_000
    level: float = 0.95
    seed: int = 0
    stratified: bool = False

    def __post_init__(self) -> None:
        if not isinstance(self.n_resamples, (int, np.integer)) or isinstance(
            self.n_resamples, bool
        ):
            raise ParameterError("n_resamples must be an integer")
        if self.n_resamples < 1:
            raise ParameterError(
                f"n_resamples must be at least 1, got {self.n_resamples!r}"
            )
        if not 0.0 < self.level < 1.0:
            raise ParameterError(
                f"level must lie strictly inside (0, 1), got {self.level!r}"
            )
        if not isinstance(self.seed, (int, np.integer)) or isinstance(
            self.seed, bool
        ):
            raise ParameterError("seed must be an integer")
        if not 0 <= int(self.seed) < 2**64:
            raise ParameterError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True)
class IntervalEstimate:
    """A point estimate with its percentile interval.

    ``lower <= upper`` always holds; ``lower <= point <= upper`` is not
    guaranteed, because percentile intervals of skewed estimators can
    legitimately exclude the full-data point estimate.
    """

    point: float
    lower: float
    upper: float
    n_failed: int

    def __post_init__(self) -> None:
        if self.upper < self.lower:
            raise ParameterError("interval bounds are out of order")


def _resample_indices(
    rng: np.random.Generator, records: RecordSet, stratified: bool
) -> np.ndarray:
    n = len(records)
    if not stratified:
        return rng.integers(0, n, size=n)
    indices = np.empty(n, dtype=np.intp)
    start = 0
    for arm in (1, 2):
        pool = np.flatnonzero(records.subsample == arm)
        indices[start : start + pool.size] = pool[
            rng.integers(0, pool.size, size=pool.size)
        ]
        start += pool.size
    return indices


def _percentile_bounds(estimates: np.ndarray, level: float) -> tuple[float, float]:
    """Interval bounds from a vector of successful resample estimates.

    Order statistics at 1-based ranks ``ceil(alpha/2 * B)`` and
    ``ceil((1 - alpha/2) * B)``.
    """
    ordered = np.sort(estimates)
    b = ordered.size
    alpha = 1.0 - level
    lo_rank = max(1, math.ceil(alpha / 2.0 * b))
    hi_rank = min(b, math.ceil((1.0 - alpha / 2.0) * b))
    return float(ordered[lo_rank - 1]), float(ordered[hi_rank - 1])


def bootstrap_vector(
    records: RecordSet,
    pipeline,
    config: BootstrapConfig,
) -> list[IntervalEstimate]:
    """Bootstrap several statistics from shared resamples.

    ``pipeline`` maps a row set to a sequence of scalars, re-running
    the full estimation chain.  All statistics see the same resampled
    rows, so one pass prices every interval.  A raised error fails the
    whole resample; a non-finite component fails only that component.
    """
    point = np.atleast_1d(np.asarray(pipeline(records), dtype=np.float64))
    k = point.size
    draws = np.full((config.n_resamples, k), np.nan)
    for b in range(config.n_resamples):
        rng = np.random.default_rng((config.seed, b))
        indices = _resample_indices(rng, records, config.stratified)
        try:
            estimate = pipeline(records.take(indices))
        except CrosswiseError:
            continue
        draws[b] = np.asarray(estimate, dtype=np.float64)

    intervals = []
    for j in range(k):
        good = draws[np.isfinite(draws[:, j]), j]
        n_failed = config.n_resamples - good.size
        if n_failed > _MAX_FAILURE_SHARE * config.n_resamples:
            raise NumericalError(
                f"{n_failed} of {config.n_resamples} bootstrap resamples "
                "failed; the interval is unreliable"
            )
        lower, upper = _percentile_bounds(good, config.level)
        intervals.append(
            IntervalEstimate(
                point=float(point[j]),
                lower=lower,
                upper=upper,
                n_failed=n_failed,
            )
        )
    return intervals


def bootstrap_ci(
    records: RecordSet,
    pipeline,
    config: BootstrapConfig,
) -> IntervalEstimate:
    """Percentile interval for a scalar pipeline.

    ``pipeline`` maps a row set to one estimate; see the module
    docstring for resampling and failure conventions.
    """
    return bootstrap_vector(
        records, lambda resample: [float(pipeline(resample))], config
    )[0]
