"""Completion-time weighting of the likelihood.

Very fast respondents are the likeliest coin-flippers, so the weighted
fit multiplies each respondent's log-likelihood contribution by a
logistic function of their completion time: implausibly quick answers
count for little, unhurried ones count fully.  The logistic curve is
pinned by two anchors — the weight ``w0`` given to the fastest included
time and the weight ``w50`` given to the median included time — which
turn into the intercept and slope through an exact two-point logit
solve.

Before any of that, times over a cutoff (default 15 minutes) are
excluded sample-wide: the long tail comes from respondents who forgot
to stop the timer, and it would otherwise drag the median anchor
around.  The excluded count feeds the attrition line of the report.

The anchor choice is a judgment call, so ``sensitivity_grid`` refits
the weighted estimate over a grid of anchor pairs; a stable grid means
the conclusion does not hang on the particular anchors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .errors import (
    ConsistencyError,
    CrosswiseError,
    DataError,
    NumericalError,
    ParameterError,
)
from .estimation import FitResult, fit_mle
from .models import DesignParams, ModelSpec
from .records import RecordSet

__all__ = [
    "DEFAULT_CUTOFF",
    "W0_GRID",
    "W50_GRID",
    "WeightParams",
    "WeightedFit",
    "SensitivityGrid",
    "filter_times",
    "time_anchors",
    "solve_beta",
    "weight",
    "weighted_fit",
    "sensitivity_grid",
]

DEFAULT_CUTOFF = 15.0
W0_GRID = (0.01, 0.1, 0.2)
W50_GRID = (0.8, 0.9, 0.99)


@dataclass(frozen=True)
class WeightParams:
    """Logistic weight curve ``logit(w) = beta0 + beta * t`` together
    with the anchors that produced it."""

    beta0: float
    beta: float
    t0: float
    t50: float
    w0: float
    w50: float

    def __post_init__(self) -> None:
        for t, w in ((self.t0, self.w0), (self.t50, self.w50)):
            if abs(self.beta0 + self.beta * t - logit(w)) > 1e-9:
                raise ConsistencyError(
                    "weight parameters do not reproduce their anchors"
                )


@dataclass(frozen=True)
class WeightedFit:
    """A weighted fit plus the bookkeeping the report needs."""

    fit: FitResult
    params: WeightParams
    n_used: int
    n_excluded: int


@dataclass(frozen=True)
class SensitivityGrid:
    """Weighted prevalence estimates over anchor combinations.

    ``pi_hat[i, j]`` belongs to ``(w0_values[i], w50_values[j])``;
    cells whose fit failed hold NaN, with the reason in ``notes``.
    """

    w0_values: tuple[float, ...]
    w50_values: tuple[float, ...]
    pi_hat: np.ndarray
    notes: tuple[str, ...]


def filter_times(times, cutoff: float = DEFAULT_CUTOFF):
    """Drop times strictly above ``cutoff`` minutes.

    Returns ``(included, excluded_count)``; the included values are
    never altered, only membership changes.
    """
    arr = np.asarray(times, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError("times must be a flat list of minutes")
    if not np.isfinite(arr).all() or (arr <= 0.0).any():
        raise DataError("completion times must be positive minutes")
    keep = arr <= cutoff
    return arr[keep], int((~keep).sum())


def time_anchors(times) -> tuple[float, float]:
    """Fastest and median of the included times.

    The even-count median is the midpoint of the central pair.
    """
    arr = np.asarray(times, dtype=np.float64)
    if arr.size == 0:
        raise DataError("no completion times to anchor the weights on")
    return float(arr.min()), float(np.median(arr))


def solve_beta(t0: float, t50: float, w0: float, w50: float) -> WeightParams:
    """Exact two-point solve of the logistic weight curve.

    ``beta`` is the logit gap per minute between the anchors; the
    intercept follows from the first anchor.
    """
    for w in (w0, w50):
        if not 0.0 < w < 1.0:
            raise ParameterError(
                f"anchor weights must lie strictly inside (0, 1), got {w!r}"
            )
    if t0 == t50:
        raise NumericalError(
            "anchor times coincide; the two-point system is singular"
        )
    beta = float((logit(w50) - logit(w0)) / (t50 - t0))
    beta0 = float(logit(w0) - beta * t0)
    return WeightParams(beta0=beta0, beta=beta, t0=t0, t50=t50, w0=w0, w50=w50)


def weight(t, params: WeightParams):
    """Logistic weight at time ``t`` (scalar or array), saturating
    smoothly in both tails."""
    value = expit(params.beta0 + params.beta * np.asarray(t, dtype=np.float64))
    if np.ndim(t) == 0:
        return float(value)
    return value


def _complete_times(records: RecordSet) -> np.ndarray:
    if not records.has_time.all():
        raise DataError("time weighting requires a completion time on every row")
    return records.time_minutes


def weighted_fit(
    records: RecordSet,
    design: DesignParams,
    spec: ModelSpec,
    *,
    w0: float = 0.1,
    w50: float = 0.9,
    cutoff: float = DEFAULT_CUTOFF,
) -> WeightedFit:
    """Filter long times, anchor the curve on the survivors, and fit
    ``spec`` with per-respondent logistic weights."""
    times = _complete_times(records)
    keep = times <= cutoff
    n_excluded = int((~keep).sum())
    if not keep.any():
        raise DataError("the time cutoff excluded every respondent")
    kept = records.where(keep)
    t0, t50 = time_anchors(kept.time_minutes)
    params = solve_beta(t0, t50, w0, w50)
    weights = weight(kept.time_minutes, params)
    fit = fit_mle(spec, None, design, records=kept, weights=weights)
    return WeightedFit(
        fit=fit, params=params, n_used=len(kept), n_excluded=n_excluded
    )


def sensitivity_grid(
    records: RecordSet,
    design: DesignParams,
    spec: ModelSpec,
    gamma: float,
    *,
    cutoff: float = DEFAULT_CUTOFF,
    w0_values: tuple[float, ...] = W0_GRID,
    w50_values: tuple[float, ...] = W50_GRID,
) -> SensitivityGrid:
    """Weighted prevalence under every anchor combination.

    ``spec`` names the base law; each cell fits its random-answering
    variant with the share fixed at ``gamma``.  Per-cell failures are
    recorded and do not abort the rest of the grid.
    """
    fit_spec = ModelSpec(spec.kind.ra_variant(), gamma)
    pi = np.full((len(w0_values), len(w50_values)), np.nan)
    notes: list[str] = []
    for i, w0 in enumerate(w0_values):
        for j, w50 in enumerate(w50_values):
            try:
                cell = weighted_fit(
                    records, design, fit_spec, w0=w0, w50=w50, cutoff=cutoff
                )
                pi[i, j] = cell.fit.pi_hat
            except CrosswiseError as exc:
                notes.append(f"w0={w0}, w50={w50}: {exc}")
    return SensitivityGrid(
        w0_values=tuple(w0_values),
        w50_values=tuple(w50_values),
        pi_hat=pi,
        notes=tuple(notes),
    )
