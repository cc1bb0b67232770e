"""Calibrating the random-answering share from a control item.

The reply frequencies alone cannot identify the share ``gamma`` of
coin-flip answerers, because random answering preserves the symmetry of
the honest law.  Surveys therefore add a control item: a crosswise
question whose paired statement has a degenerate design rate (0 or 1),
so that the correct reply is known for every respondent.  Someone who
answers it wrongly either flipped a coin (half of the random answerers
end up wrong) or did not know the true status behind the statement.

Two calibrations are implemented:

``gamma_naive``
    Doubles the control error rate, ``min(2 * e_c, 1)``.  This charges
    the whole error rate to random answering and is an upper bound
    whenever some respondents are merely ignorant of the control fact.

``gamma_delta_pi``
    Exploits that dropping the control-incorrect respondents removes
    half of the random answerers.  Fitting the base law with those
    respondents in and out gives prevalences whose gap ``delta_pi``
    estimates the pull of that removed half, so ``pi_out - delta_pi``
    is a calibrated target prevalence.  The share is then the fixed
    ``gamma`` at which the random-answering variant of the base law,
    fitted to the *full* data, reproduces the target — found by
    bisection, since the fitted prevalence moves monotonically away
    from 0.5 as ``gamma`` grows.

The leftover ``phi_implied = e_c - gamma_hat / 2`` estimates the share
of respondents who answered the control item wrongly out of ignorance
rather than coin-flipping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError
from .estimation import FitResult, ResponseCounts, fit_mle, moment_theta
from .models import SAME, DIFFERENT, DesignParams, ModelKind, ModelSpec
from .records import RecordSet

__all__ = [
    "ControlOutcome",
    "GammaEstimate",
    "GammaSolution",
    "control_error_rate",
    "gamma_naive",
    "gamma_delta_pi",
    "solve_gamma_for_target",
]

_GAMMA_TOL = 1e-6
_PI_TOL = 1e-6
_MAX_BISECT = 80


@dataclass(frozen=True)
class ControlOutcome:
    """Correctness of the control item across a survey.

    ``incorrect`` marks rows that carry a control item *and* answered it
    wrongly; rows without a control item are never marked.  The error
    rate is taken over the ``n_control`` rows that have the item.
    """

    n_control: int
    n_incorrect: int
    error_rate: float
    incorrect: np.ndarray

    @property
    def doubled(self) -> float:
        """``2 * e_c``, the uncapped naive share."""
        return 2.0 * self.error_rate


@dataclass(frozen=True)
class GammaSolution:
    """Result of :func:`solve_gamma_for_target`.

    ``fit`` is the fixed-share fit of the law at the returned ``gamma``
    on the full table — the verification that the target prevalence is
    actually reproduced, kept so callers need not refit.
    """

    gamma: float
    fit: FitResult
    boundary: bool = False
    degenerate: bool = False


@dataclass(frozen=True)
class GammaEstimate:
    """A calibrated random-answering share.

    The ``delta_pi`` method fills the diagnostic fields; the naive
    method leaves them None.  ``fit_ra`` is the random-answering-variant
    fit at ``gamma_hat`` on the full data where the method produces one.
    Flags: ``truncated`` (naive share capped at 1), ``negative_delta``
    (prevalence gap came out negative, share forced to 0), ``boundary``
    (bisection could not bracket the target), ``degenerate`` (any share
    reproduces the target), ``exceeds_naive`` (calibrated share above
    ``2 * e_c``, which control-error bookkeeping says should not happen).
    """

    gamma_hat: float
    method: str
    error_rate: float
    phi_implied: float
    pi_in: float | None = None
    pi_out: float | None = None
    delta_pi: float | None = None
    pi_ra_target: float | None = None
    theta_hat: float | None = None
    fit_ra: FitResult | None = None
    truncated: bool = False
    negative_delta: bool = False
    boundary: bool = False
    degenerate: bool = False
    exceeds_naive: bool = False


def control_error_rate(records: RecordSet) -> ControlOutcome:
    """Score the control item.

    The correct reply is SAME when the true status behind the control
    statement matches its degenerate design rate (both 'yes' or both
    'no'), DIFFERENT otherwise.
    """
    has = records.has_control
    n_control = int(has.sum())
    if n_control == 0:
        raise DataError("no rows carry a control item")
    correct_reply = np.where(
        records.control_a_true == records.control_b_prob, SAME, DIFFERENT
    )
    incorrect = has & (records.control_answer != correct_reply)
    n_incorrect = int(incorrect.sum())
    return ControlOutcome(
        n_control=n_control,
        n_incorrect=n_incorrect,
        error_rate=n_incorrect / n_control,
        incorrect=incorrect,
    )


def gamma_naive(outcome: ControlOutcome) -> GammaEstimate:
    """Charge the whole control error rate to random answering."""
    doubled = outcome.doubled
    gamma_hat = min(1.0, doubled)
    return GammaEstimate(
        gamma_hat=gamma_hat,
        method="naive_2ec",
        error_rate=outcome.error_rate,
        phi_implied=outcome.error_rate - 0.5 * gamma_hat,
        truncated=doubled > 1.0,
    )


class _FastPathInvalid(Exception):
    """Internal: the closed-form bisection iterate left its valid region."""


def _fast_pi_of_gamma(counts: ResponseCounts, design: DesignParams):
    """Closed-form inversion of the saturated one-sayer law's fitted
    prevalence as a function of the fixed share.

    It coincides with the likelihood optimum whenever that optimum is
    interior; where the optimum hits a parameter bound the two diverge,
    which is why a root found through this shortcut is only accepted
    after an actual fit confirms it.  A near-singular denominator raises
    ``_FastPathInvalid``.
    """
    c_d1, c_s1, c_d2, c_s2 = counts.conditional()
    p, q = design.p, design.q

    def pi_of(gamma: float) -> float:
        denom = (p - q) * (c_s1 + c_s2 - gamma)
        if abs(denom) < 1e-9:
            raise _FastPathInvalid
        return (p * c_s2 - q * c_s1 - gamma * (p - 0.5)) / denom

    return pi_of


def _bisect(pi_of, hi: float, pi_target: float):
    """Sign-change bisection of ``pi_of(gamma) - pi_target`` on [0, hi].

    Returns ``(gamma, boundary)`` where ``gamma`` is an evaluated point
    whose miss is within tolerance; a non-bracketing interval yields the
    endpoint with the smaller miss and the boundary flag.
    """
    f_lo = pi_of(0.0) - pi_target
    if abs(f_lo) <= _PI_TOL:
        return 0.0, False
    f_hi = pi_of(hi) - pi_target
    if (f_lo > 0.0) == (f_hi > 0.0):
        return (0.0, True) if abs(f_lo) <= abs(f_hi) else (hi, True)
    lo = 0.0
    mid = 0.5 * hi
    for _ in range(_MAX_BISECT):
        mid = 0.5 * (lo + hi)
        f_mid = pi_of(mid) - pi_target
        if hi - lo <= 2.0 * _GAMMA_TOL and abs(f_mid) <= _PI_TOL:
            break
        if (f_mid > 0.0) == (f_lo > 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return mid, False


def solve_gamma_for_target(
    counts: ResponseCounts,
    design: DesignParams,
    kind: ModelKind,
    pi_target: float,
) -> GammaSolution:
    """Find the fixed share at which a random-answering law, fitted to
    ``counts``, reproduces ``pi_target``.

    ``kind`` may be a base law or its random-answering variant; the
    search runs over ``[0, 1 - theta_hat]`` with ``theta_hat`` the
    clipped one-saying plug-in (0 for laws without it).  The returned
    share is verified by an actual fit — for the saturated one-sayer
    family the bisection iterates use the closed-form inversion, and
    fall back to per-iterate fits whenever that shortcut leaves its
    valid region or the verification misses the target.
    """
    kind = kind.ra_variant()
    if kind.has_theta:
        theta_hat = min(1.0, max(0.0, moment_theta(counts)))
    else:
        theta_hat = 0.0
    hi = 1.0 - theta_hat

    def fitted_pi(gamma: float) -> float:
        return fit_mle(ModelSpec(kind, gamma), counts, design).pi_hat

    gamma = None
    if kind is ModelKind.ONE_SAYERS_RA and hi > 1e-6:
        # The inversion has a pole exactly at the upper endpoint (the
        # one-saying plug-in makes c_s1 + c_s2 = 1 - theta_hat), so the
        # shortcut searches a hair inside it; the sign there matches the
        # one-sided limit and the verification fit arbitrates anyway.
        try:
            gamma, boundary = _bisect(
                _fast_pi_of_gamma(counts, design), hi - 1e-7, pi_target
            )
        except _FastPathInvalid:
            gamma = None
        if gamma is not None and boundary:
            # Bracketing verdicts are only trusted from real fits.
            gamma = None
        if gamma is not None:
            fit = fit_mle(ModelSpec(kind, gamma), counts, design)
            if abs(fit.pi_hat - pi_target) > _PI_TOL:
                gamma = None
    if gamma is None:
        gamma, boundary = _bisect(fitted_pi, hi, pi_target)
        fit = fit_mle(ModelSpec(kind, gamma), counts, design)

    # A flat profile (every share reproduces a prevalence of 0.5) exits
    # the bisection at 0 immediately; no extra fit is needed to spot it.
    degenerate = (
        gamma == 0.0
        and abs(pi_target - 0.5) <= _PI_TOL
        and abs(fit.pi_hat - 0.5) <= _PI_TOL
    )
    return GammaSolution(gamma=gamma, fit=fit, boundary=boundary, degenerate=degenerate)


def gamma_delta_pi(
    records: RecordSet,
    design: DesignParams,
    base_model: ModelKind = ModelKind.ONE_SAYERS,
) -> GammaEstimate:
    """Calibrate the random-answering share from the prevalence gap
    between fits with the control-incorrect respondents in and out.

    ``base_model`` must be a law without a random-answering share (its
    variant with one is what the solved share is plugged into).  Rows
    without a control item stay in both fits; only verified-incorrect
    rows are dropped from the "out" fit.  A negative gap has no
    random-answering reading and maps to a share of 0 with the
    ``negative_delta`` flag.
    """
    if base_model.has_random:
        raise ParameterError("base_model must be a law without a random-answering share")
    if base_model is ModelKind.CWM:
        raise ParameterError("the single-arm law cannot drive this calibration")
    outcome = control_error_rate(records)
    counts_in = ResponseCounts.from_records(records)
    keep = ~outcome.incorrect
    if not keep.any():
        raise DataError("control-correct subset is degenerate: no rows survive")
    counts_out = ResponseCounts.from_records(records.where(keep))
    if counts_out.n_s1 <= 0.0 or counts_out.n_s2 <= 0.0:
        raise DataError(
            "control-correct subset is degenerate: an arm has no remaining rows"
        )

    base_spec = ModelSpec(base_model)
    fit_in = fit_mle(base_spec, counts_in, design)
    fit_out = fit_mle(base_spec, counts_out, design)
    delta = fit_in.pi_hat - fit_out.pi_hat
    target = fit_out.pi_hat - delta
    ra_kind = base_model.ra_variant()

    if delta < 0.0:
        gamma_hat = 0.0
        fit_ra = fit_mle(ModelSpec(ra_kind, gamma_hat), counts_in, design)
        boundary = degenerate = False
        negative = True
    else:
        solution = solve_gamma_for_target(counts_in, design, ra_kind, target)
        gamma_hat = solution.gamma
        fit_ra = solution.fit
        boundary = solution.boundary
        degenerate = solution.degenerate
        negative = False

    return GammaEstimate(
        gamma_hat=gamma_hat,
        method="delta_pi",
        error_rate=outcome.error_rate,
        phi_implied=outcome.error_rate - 0.5 * gamma_hat,
        pi_in=fit_in.pi_hat,
        pi_out=fit_out.pi_hat,
        delta_pi=delta,
        pi_ra_target=target,
        theta_hat=fit_in.theta_hat,
        fit_ra=fit_ra,
        negative_delta=negative,
        boundary=boundary,
        degenerate=degenerate,
        exceeds_naive=gamma_hat > outcome.doubled + 1e-12,
    )
