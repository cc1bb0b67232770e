"""Synthetic survey populations for estimator oracle checks.

Respondents fall into three exclusive latent classes — honest,
one-sayer, and random — with shares ``1 - theta - gamma``, ``theta``,
and ``gamma``.  Honest respondents evaluate the crosswise rule on their
sensitive status and the innocuous draw of their arm; one-sayers answer
DIFFERENT regardless; random respondents flip a fair coin on the
sensitive item and again, independently, on the control item.

The control item pairs a statement that is true for everyone with a
degenerate innocuous rate drawn 0 or 1 per respondent, so the correct
reply is known.  Non-random respondents may be *ignorant* of the
control fact: they answer as if the statement were false, which is
wrong under either innocuous rate.  Ignorance strikes a non-random
respondent with probability ``phi / (1 - gamma)``, so the population
share of ignorant respondents is exactly ``phi`` and the control error
rate decomposes as ``e_c = .5 * gamma + phi`` — the identity the
calibration estimators invert.  (A per-respondent rate of ``phi``
itself would break that identity by a factor ``1 - gamma``.)

Completion times are log-normal with a per-class median; setting
``link_random_to_speed`` gives the random class a shorter median so
that time weighting has something to find.  A configurable fraction of
arbitrarily long times mimics respondents who forgot to stop the
timer.  Times are recorded at 0.1-minute resolution, matching the CSV
format, so a file round trip reproduces them exactly.

Everything is drawn from one seeded generator in a fixed order with
full-length vectors per step, so a (spec, seed) pair always yields the
identical record list.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .estimation import ResponseCounts
from .models import DIFFERENT, SAME, DesignParams, ModelKind, cell_probs
from .records import CLASS_HONEST, CLASS_ONE_SAYER, CLASS_RANDOM, RecordSet

__all__ = ["TimeModel", "PopulationSpec", "simulate", "oracle_counts"]


@dataclass(frozen=True)
class TimeModel:
    """Log-normal completion-time model.

    ``median_minutes`` applies to honest respondents and one-sayers;
    random respondents use ``random_median_minutes`` when the population
    links random answering to speed, and the common median otherwise.
    ``slow_fraction`` of respondents (any class) have their time
    multiplied by ``slow_multiplier`` — the forgotten stop-the-timer
    tail that time filtering is meant to remove.
    """

    median_minutes: float = 20.0
    random_median_minutes: float = 6.0
    sigma: float = 0.4
    slow_fraction: float = 0.0
    slow_multiplier: float = 10.0

    def __post_init__(self) -> None:
        if not (self.median_minutes > 0.0 and self.random_median_minutes > 0.0):
            raise ParameterError("time medians must be positive")
        if not 0.0 <= self.sigma <= 5.0:
            raise ParameterError("time spread sigma must lie in [0, 5]")
        if not 0.0 <= self.slow_fraction < 1.0:
            raise ParameterError("slow_fraction must lie in [0, 1)")
        if self.slow_multiplier < 1.0:
            raise ParameterError("slow_multiplier must be >= 1")


@dataclass(frozen=True)
class PopulationSpec:
    """Generative description of a survey population."""

    n: int
    pi: float
    theta: float = 0.0
    gamma: float = 0.0
    phi: float = 0.0
    design: DesignParams = field(default_factory=lambda: DesignParams(0.8))
    subsample_split: float = 0.5
    force_balance: bool = False
    time_model: TimeModel | None = field(default_factory=TimeModel)
    link_random_to_speed: bool = False

    def __post_init__(self) -> None:
        if not (isinstance(self.n, int) and self.n >= 1):
            raise ParameterError(f"n must be a positive integer, got {self.n!r}")
        for name in ("pi", "theta", "gamma", "phi"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and 0.0 <= value <= 1.0):
                raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
        if self.theta + self.gamma > 1.0 + 1e-12:
            raise ParameterError("theta + gamma must not exceed 1")
        if self.phi > 1.0 - self.gamma + 1e-12:
            raise ParameterError(
                "phi cannot exceed 1 - gamma: every ignorant respondent "
                "is a non-random respondent"
            )
        if not 0.0 < self.subsample_split < 1.0:
            raise ParameterError("subsample_split must lie strictly between 0 and 1")
        if not isinstance(self.design, DesignParams):
            raise ParameterError("design must be a DesignParams")

    @property
    def expected_control_error(self) -> float:
        """The mixture identity ``e_c = .5 * gamma + phi``."""
        return 0.5 * self.gamma + self.phi


def simulate(spec: PopulationSpec, seed: int) -> RecordSet:
    """Draw a survey of ``spec.n`` respondents.

    The latent class of each respondent is kept on the records for
    oracle checks; estimators never look at it.
    """
    rng = np.random.default_rng(seed)
    n = spec.n

    u = rng.random(n)
    latent = np.where(
        u < spec.gamma,
        CLASS_RANDOM,
        np.where(u < spec.gamma + spec.theta, CLASS_ONE_SAYER, CLASS_HONEST),
    ).astype(np.int8)
    is_random = latent == CLASS_RANDOM

    # ignorance of the control fact, among non-random respondents only
    cond_phi = spec.phi / (1.0 - spec.gamma) if spec.gamma < 1.0 else 0.0
    ignorant = ~is_random & (rng.random(n) < cond_phi)

    if spec.force_balance:
        n_first = int(round(n * spec.subsample_split))
        subsample = np.full(n, 2, dtype=np.int8)
        subsample[rng.permutation(n)[:n_first]] = 1
    else:
        subsample = np.where(rng.random(n) < spec.subsample_split, 1, 2).astype(np.int8)
    rate = np.where(subsample == 1, spec.design.p, spec.design.q)

    sensitive = rng.random(n) < spec.pi
    innocuous = rng.random(n) < rate
    answer = np.where(sensitive == innocuous, DIFFERENT, SAME).astype(np.int8)
    answer[latent == CLASS_ONE_SAYER] = DIFFERENT
    coin_main = rng.random(n) < 0.5
    answer[is_random] = np.where(coin_main[is_random], DIFFERENT, SAME)

    # control item: the statement is true for everyone; the paired
    # degenerate rate is 0 or 1, so the correct reply is known
    control_a = np.ones(n, dtype=np.int8)
    control_b = (rng.random(n) < 0.5).astype(np.int8)
    correct_reply = np.where(control_b == control_a, SAME, DIFFERENT).astype(np.int8)
    control_answer = correct_reply.copy()
    flip = 3 - correct_reply
    control_answer[ignorant] = flip[ignorant]
    coin_control = rng.random(n) < 0.5
    control_answer[is_random] = np.where(coin_control[is_random], DIFFERENT, SAME)

    if spec.time_model is None:
        time_minutes = None
    else:
        tm = spec.time_model
        median = np.full(n, tm.median_minutes)
        if spec.link_random_to_speed:
            median[is_random] = tm.random_median_minutes
        time_minutes = rng.lognormal(mean=0.0, sigma=tm.sigma, size=n) * median
        slow = rng.random(n) < tm.slow_fraction
        time_minutes[slow] *= tm.slow_multiplier
        time_minutes = np.maximum(np.round(time_minutes, 1), 0.1)

    ids = np.array([f"r{i + 1:06d}" for i in range(n)], dtype=object)
    return RecordSet(
        answer=answer,
        subsample=subsample,
        control_answer=control_answer,
        control_a_true=control_a,
        control_b_prob=control_b,
        time_minutes=time_minutes,
        respondent_id=ids,
        latent_class=latent,
    )


def oracle_counts(spec: PopulationSpec) -> ResponseCounts:
    """Exact expected reply table of ``spec`` — the sampling-noise-free
    stand-in for :func:`simulate` in estimator round-trip tests."""
    d1, s1, d2, s2 = cell_probs(
        ModelKind.ONE_SAYERS_RA,
        spec.pi,
        spec.theta,
        spec.gamma,
        spec.design.p,
        spec.design.q,
    )
    n1 = spec.n * spec.subsample_split
    n2 = spec.n - n1
    return ResponseCounts(d1 * n1, s1 * n1, d2 * n2, s2 * n2)
