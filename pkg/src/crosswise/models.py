"""Response laws for crosswise-format surveys.

A crosswise-format survey pairs a sensitive statement with an innocuous
statement whose 'yes' rate is known by design, and asks only whether the
two answers are the SAME or DIFFERENT.  Because both joint states map
onto each reply, no single answer is incriminating, yet the prevalence
of the sensitive attribute stays identifiable.

The extended design splits respondents into two sub-samples.  Sub-sample
1 receives an innocuous statement with 'yes' probability ``p`` and
sub-sample 2 the complementary statement with probability ``q = 1 - p``.
The second sub-sample turns the design into a two-arm instrument: it
separates honest answering from the response anomalies modelled here.

Conventions used throughout the package:

* ``y = 1`` denotes a DIFFERENT reply and ``y = 2`` a SAME reply.
* ``s = 1`` is the ``p`` sub-sample and ``s = 2`` the ``q`` sub-sample.
* A response law is the quadruple of conditional reply probabilities
  ``(P(1|1), P(2|1), P(1|2), P(2|2))``.

Four laws form a ladder of increasingly realistic response behaviour:

``ECWM``
    Everyone answers truthfully.  The law is symmetric across arms:
    ``P(1|1) = P(2|2)`` and ``P(2|1) = P(1|2)``.

``ECWM_RA``
    A fraction ``gamma`` of respondents picks SAME or DIFFERENT by a
    mental coin flip ("random answerers").  The symmetry of the ECWM is
    preserved, which is exactly why ``gamma`` cannot be estimated from
    the reply frequencies alone and must be supplied as a fixed value.

``ONE_SAYERS``
    A fraction ``theta`` of respondents evades by always replying
    DIFFERENT, which reads as a double 'no'.  This breaks the arm
    symmetry, so ``theta`` is identified alongside ``pi``.

``ONE_SAYERS_RA``
    Both anomalies at once; ``theta`` is free, ``gamma`` fixed.

``CWM`` is the single-sample ancestor of the design (only arm 1 exists)
and is included for completeness.

The honest-reply ingredient of every law is the pair ``A_s(pi) =
p_s*pi + q_s*(1-pi)`` for DIFFERENT and its complement for SAME, with
``(p_1, q_1) = (p, q)`` and ``(p_2, q_2) = (q, p)``.  One-sayers add
``theta`` to the DIFFERENT cell of both arms; random answerers
contribute ``gamma/2`` to every cell.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import ConsistencyError, DesignError, ParameterError

__all__ = [
    "DIFFERENT",
    "SAME",
    "ModelKind",
    "DesignParams",
    "ModelParams",
    "ModelSpec",
    "ResponseProbs",
    "cell_probs",
    "response_probs",
    "reduce_check",
]

#: Reply codes used in count tables and respondent records.
DIFFERENT = 1
SAME = 2

#: Tolerance for the per-arm normalization check on computed laws.
_ROW_TOL = 1e-9

#: Slack for inclusive parameter-bound checks, absorbing float roundoff.
_BOUND_EPS = 1e-12


class ModelKind(enum.Enum):
    """The five response laws supported by the package."""

    CWM = "cwm"
    ECWM = "ecwm"
    ECWM_RA = "ecwm_ra"
    ONE_SAYERS = "one_sayers"
    ONE_SAYERS_RA = "one_sayers_ra"

    @property
    def has_theta(self) -> bool:
        """Whether the one-saying prevalence is a free parameter."""
        return self in (ModelKind.ONE_SAYERS, ModelKind.ONE_SAYERS_RA)

    @property
    def has_random(self) -> bool:
        """Whether the law includes a (fixed) random-answering share."""
        return self in (ModelKind.ECWM_RA, ModelKind.ONE_SAYERS_RA)

    @property
    def n_free_params(self) -> int:
        return 2 if self.has_theta else 1

    @property
    def residual_df(self) -> int:
        """Degrees of freedom left for goodness of fit.

        Each non-empty arm contributes one non-redundant reply
        proportion; the CWM has a single arm.
        """
        n_props = 1 if self is ModelKind.CWM else 2
        return n_props - self.n_free_params

    def ra_variant(self) -> "ModelKind":
        """The law obtained by adding fixed-share random answering."""
        if self is ModelKind.ECWM:
            return ModelKind.ECWM_RA
        if self is ModelKind.ONE_SAYERS:
            return ModelKind.ONE_SAYERS_RA
        if self.has_random:
            return self
        raise ParameterError(f"no random-answering variant for {self.value}")


@dataclass(frozen=True)
class DesignParams:
    """Randomization design of the two-arm survey.

    Parameters
    ----------
    p : float
        'Yes' rate of the innocuous statement shown to arm 1.  Arm 2
        receives the complement ``q = 1 - p``.  A rate of exactly 0.5
        makes every law flat in ``pi`` and is rejected.
    """

    p: float

    def __post_init__(self) -> None:
        if not 0.0 < self.p < 1.0:
            raise DesignError(f"design rate p must lie in (0, 1), got {self.p!r}")
        if self.p == 0.5:
            raise DesignError("design rate p = 0.5 leaves the prevalence unidentified")

    @property
    def q(self) -> float:
        return 1.0 - self.p


@dataclass(frozen=True)
class ModelParams:
    """A point in the parameter space of the response laws.

    ``pi`` is the sensitive-attribute prevalence, ``theta`` the
    one-saying prevalence, and ``gamma`` the random-answering
    prevalence.  The three describe disjoint respondent classes, so
    ``theta + gamma`` may not exceed 1.
    """

    pi: float
    theta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self) -> None:
        for name in ("pi", "theta", "gamma"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value)):
                raise ParameterError(f"{name} must be a finite number, got {value!r}")
            if not 0.0 <= value <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
        if self.theta + self.gamma > 1.0 + _BOUND_EPS:
            raise ParameterError(
                f"theta + gamma must not exceed 1, got {self.theta + self.gamma!r}"
            )


@dataclass(frozen=True)
class ModelSpec:
    """A response law together with its fixed (non-estimated) inputs.

    Laws with random answering carry the fixed share ``fixed_gamma``;
    the other laws must not.  This keeps "which parameters are free"
    explicit at every call site.
    """

    kind: ModelKind
    fixed_gamma: float | None = None

    def __post_init__(self) -> None:
        if self.kind.has_random:
            g = self.fixed_gamma
            if g is None:
                raise ParameterError(f"{self.kind.value} requires fixed_gamma")
            if not (isinstance(g, (int, float)) and math.isfinite(g) and 0.0 <= g <= 1.0):
                raise ParameterError(f"fixed_gamma must lie in [0, 1], got {g!r}")
        elif self.fixed_gamma is not None:
            raise ParameterError(f"{self.kind.value} does not take fixed_gamma")

    @classmethod
    def cwm(cls) -> "ModelSpec":
        return cls(ModelKind.CWM)

    @classmethod
    def ecwm(cls) -> "ModelSpec":
        return cls(ModelKind.ECWM)

    @classmethod
    def ecwm_ra(cls, gamma: float) -> "ModelSpec":
        return cls(ModelKind.ECWM_RA, fixed_gamma=gamma)

    @classmethod
    def one_sayers(cls) -> "ModelSpec":
        return cls(ModelKind.ONE_SAYERS)

    @classmethod
    def one_sayers_ra(cls, gamma: float) -> "ModelSpec":
        return cls(ModelKind.ONE_SAYERS_RA, fixed_gamma=gamma)

    @property
    def gamma(self) -> float:
        """The fixed random-answering share (0 for laws without one)."""
        return self.fixed_gamma if self.fixed_gamma is not None else 0.0


@dataclass(frozen=True)
class ResponseProbs:
    """Reply law ``(P(1|1), P(2|1), P(1|2), P(2|2))`` for one design point.

    Fields are named by reply and arm; ``diff_s2`` is the probability of
    a DIFFERENT reply in arm 2.  For the single-arm CWM the arm-2 fields
    duplicate arm 1.
    """

    diff_s1: float
    same_s1: float
    diff_s2: float
    same_s2: float

    def __post_init__(self) -> None:
        for value in self.as_tuple():
            if not -_ROW_TOL <= value <= 1.0 + _ROW_TOL:
                raise ConsistencyError(f"reply probability out of range: {value!r}")
        if (
            abs(self.diff_s1 + self.same_s1 - 1.0) > _ROW_TOL
            or abs(self.diff_s2 + self.same_s2 - 1.0) > _ROW_TOL
        ):
            raise ConsistencyError("reply probabilities of an arm must sum to 1")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.diff_s1, self.same_s1, self.diff_s2, self.same_s2)

    def prob(self, y: int, s: int) -> float:
        """Probability of reply ``y`` (1 DIFFERENT / 2 SAME) in arm ``s``."""
        if y not in (DIFFERENT, SAME) or s not in (1, 2):
            raise ParameterError(f"invalid reply/arm index ({y}, {s})")
        return self.as_tuple()[2 * (s - 1) + (y - 1)]


def cell_probs(
    kind: ModelKind,
    pi: float,
    theta: float,
    gamma: float,
    p: float,
    q: float,
) -> tuple[float, float, float, float]:
    """Scalar kernel computing a reply law without any validation.

    This is the hot path shared by :func:`response_probs` and the
    likelihood optimizers; each law is written out explicitly rather
    than derived from the most general one, so that the nesting
    identities checked by :func:`reduce_check` remain a genuine
    cross-check.
    """
    co_pi = 1.0 - pi
    if kind is ModelKind.CWM:
        d1 = p * pi + q * co_pi
        return (d1, 1.0 - d1, d1, 1.0 - d1)
    if kind is ModelKind.ECWM:
        d1 = p * pi + q * co_pi
        d2 = q * pi + p * co_pi
        return (d1, 1.0 - d1, d2, 1.0 - d2)
    if kind is ModelKind.ECWM_RA:
        half_g = 0.5 * gamma
        pe = (1.0 - gamma) * p + half_g
        qe = (1.0 - gamma) * q + half_g
        d1 = pe * pi + qe * co_pi
        d2 = qe * pi + pe * co_pi
        return (d1, 1.0 - d1, d2, 1.0 - d2)
    if kind is ModelKind.ONE_SAYERS:
        honest = 1.0 - theta
        d1 = (honest * p + theta) * pi + (honest * q + theta) * co_pi
        s1 = honest * q * pi + honest * p * co_pi
        d2 = (honest * q + theta) * pi + (honest * p + theta) * co_pi
        s2 = honest * p * pi + honest * q * co_pi
        return (d1, s1, d2, s2)
    if kind is ModelKind.ONE_SAYERS_RA:
        honest = 1.0 - gamma - theta
        shift_d = theta + 0.5 * gamma
        shift_s = 0.5 * gamma
        d1 = (honest * p + shift_d) * pi + (honest * q + shift_d) * co_pi
        s1 = (honest * q + shift_s) * pi + (honest * p + shift_s) * co_pi
        d2 = (honest * q + shift_d) * pi + (honest * p + shift_d) * co_pi
        s2 = (honest * p + shift_s) * pi + (honest * q + shift_s) * co_pi
        return (d1, s1, d2, s2)
    raise ParameterError(f"unknown model kind {kind!r}")


def response_probs(
    spec: ModelSpec, params: ModelParams, design: DesignParams
) -> ResponseProbs:
    """Reply law of ``spec`` at ``params`` under ``design``.

    Laws without a free ``theta`` require ``params.theta == 0``, and the
    random-answering share in ``params.gamma`` must equal
    ``spec.gamma`` (zero for laws without a fixed share); mismatches raise
    :class:`~crosswise.errors.ParameterError` rather than being silently
    ignored.
    """
    kind = spec.kind
    if not kind.has_theta and params.theta != 0.0:
        raise ParameterError(f"{kind.value} has no theta parameter")
    if params.gamma != spec.gamma:
        raise ParameterError(
            f"params.gamma={params.gamma!r} does not match "
            f"spec.gamma={spec.gamma!r}"
        )
    d1, s1, d2, s2 = cell_probs(
        kind, params.pi, params.theta, params.gamma, design.p, design.q
    )
    return ResponseProbs(d1, s1, d2, s2)


# Nesting structure used by reduce_check: for each law, the laws it
# collapses onto when theta and/or gamma vanish.
def _reductions(spec: ModelSpec, params: ModelParams):
    kind = spec.kind
    if kind is ModelKind.ONE_SAYERS_RA:
        if spec.gamma == 0.0:
            yield ModelSpec.one_sayers(), params_without(params, gamma=True)
        if params.theta == 0.0:
            yield ModelSpec.ecwm_ra(spec.gamma), params_without(params, theta=True)
        if spec.gamma == 0.0 and params.theta == 0.0:
            yield ModelSpec.ecwm(), ModelParams(params.pi)
    elif kind is ModelKind.ECWM_RA and spec.gamma == 0.0:
        yield ModelSpec.ecwm(), ModelParams(params.pi)
    elif kind is ModelKind.ONE_SAYERS and params.theta == 0.0:
        yield ModelSpec.ecwm(), ModelParams(params.pi)


def params_without(params: ModelParams, theta: bool = False, gamma: bool = False) -> ModelParams:
    """Copy of ``params`` with the named components removed (set to 0)."""
    return ModelParams(
        pi=params.pi,
        theta=0.0 if theta else params.theta,
        gamma=0.0 if gamma else params.gamma,
    )


def reduce_check(
    spec: ModelSpec,
    params: ModelParams,
    design: DesignParams,
    tol: float = 1e-12,
) -> ResponseProbs:
    """Compute a reply law and verify its nesting identities.

    Whenever ``params`` sits on a boundary where ``spec`` collapses onto
    a simpler law (``theta = 0`` and/or a fixed share of 0), the two
    laws are evaluated independently and compared cell by cell.  A
    disagreement beyond ``tol`` raises
    :class:`~crosswise.errors.ConsistencyError`; otherwise the law of
    ``spec`` is returned unchanged.
    """
    probs = response_probs(spec, params, design)
    for reduced_spec, reduced_params in _reductions(spec, params):
        reduced = response_probs(reduced_spec, reduced_params, design)
        for a, b in zip(probs.as_tuple(), reduced.as_tuple()):
            if abs(a - b) > tol:
                raise ConsistencyError(
                    f"{spec.kind.value} at {params} does not collapse onto "
                    f"{reduced_spec.kind.value}: |{a!r} - {b!r}| > {tol}"
                )
    return probs
