"""The estimation pipeline behind the command line: run configuration,
the four-model ladder, and report assembly.

A run fits the same survey under progressively stronger corrections —

    ECWM            two-arm law, prevalence only
    + one-saying    adds the always-DIFFERENT share
    + ra            fixes the coin-flipper share at the calibrated value
    + weights       additionally downweights implausibly fast rows

— and reports each row's prevalence next to its share of the
uncorrected estimate, so the reader sees how much of the headline
figure each correction removes.  The calibrated share feeding the
``+ ra`` and ``+ weights`` rows comes from the control item, by the
method named in the configuration.  When bootstrapping is enabled, the
entire chain (calibration included) is re-run on every resample, and
each row carries a percentile interval.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .bootstrapping import BootstrapConfig, IntervalEstimate, bootstrap_vector
from .calibration import (
    GammaEstimate,
    control_error_rate,
    gamma_delta_pi,
    gamma_naive,
)
from .errors import ConfigError
from .estimation import FitResult, ResponseCounts, fit_mle
from .models import DesignParams, ModelKind, ModelSpec
from .records import RecordSet
from .timeweights import DEFAULT_CUTOFF, WeightedFit, weighted_fit

__all__ = [
    "GAMMA_METHODS",
    "BASE_MODELS",
    "RunConfig",
    "LadderRow",
    "CalibrationBlock",
    "WeightBlock",
    "AttritionBlock",
    "Report",
    "run_pipeline",
    "render_text",
    "render_json",
]

GAMMA_METHODS = ("none", "naive_2ec", "delta_pi", "fixed")
BASE_MODELS = {
    "ecwm": ModelKind.ECWM,
    "one_sayers": ModelKind.ONE_SAYERS,
}


@dataclass(frozen=True)
class RunConfig:
    """Everything a pipeline run needs beyond the survey itself."""

    design_p: float
    base_model: str = "one_sayers"
    gamma_method: str = "delta_pi"
    fixed_gamma: float | None = None
    weighting: bool = False
    weight_w0: float = 0.1
    weight_w50: float = 0.9
    time_cutoff_minutes: float = DEFAULT_CUTOFF
    bootstrap_resamples: int = 0
    bootstrap_level: float = 0.95
    stratified_bootstrap: bool = False
    seed: int = 0

    def __post_init__(self) -> None:
        DesignParams(self.design_p)  # validates, including p != .5
        if self.base_model not in BASE_MODELS:
            raise ConfigError(
                f"base_model must be one of {sorted(BASE_MODELS)}, "
                f"got {self.base_model!r}"
            )
        if self.gamma_method not in GAMMA_METHODS:
            raise ConfigError(
                f"gamma_method must be one of {GAMMA_METHODS}, "
                f"got {self.gamma_method!r}"
            )
        if self.gamma_method == "fixed":
            g = self.fixed_gamma
            if g is None or not 0.0 <= float(g) <= 1.0:
                raise ConfigError(
                    "gamma_method 'fixed' needs a share in [0, 1], "
                    f"got {g!r}"
                )
        elif self.fixed_gamma is not None:
            raise ConfigError(
                "a fixed share only makes sense with gamma_method 'fixed'"
            )
        for name, w in (("weight_w0", self.weight_w0), ("weight_w50", self.weight_w50)):
            if not 0.0 < float(w) < 1.0:
                raise ConfigError(
                    f"{name} must lie strictly inside (0, 1), got {w!r}"
                )
        if not self.time_cutoff_minutes > 0.0:
            raise ConfigError("time_cutoff_minutes must be positive")
        if not isinstance(self.bootstrap_resamples, int) or isinstance(
            self.bootstrap_resamples, bool
        ):
            raise ConfigError("bootstrap_resamples must be an integer")
        if self.bootstrap_resamples < 0:
            raise ConfigError("bootstrap_resamples must not be negative")
        if not 0.0 < self.bootstrap_level < 1.0:
            raise ConfigError("bootstrap_level must lie strictly inside (0, 1)")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")

    # -- derived views -----------------------------------------------

    @property
    def design(self) -> DesignParams:
        return DesignParams(self.design_p)

    @property
    def base_kind(self) -> ModelKind:
        return BASE_MODELS[self.base_model]

    @property
    def bootstrap(self) -> BootstrapConfig | None:
        if self.bootstrap_resamples == 0:
            return None
        return BootstrapConfig(
            n_resamples=self.bootstrap_resamples,
            level=self.bootstrap_level,
            seed=self.seed,
            stratified=self.stratified_bootstrap,
        )

    # -- flat-file form ----------------------------------------------

    _KEYS = {
        "design_p": float,
        "base_model": str,
        "gamma_method": str,
        "weighting": str,
        "weight_w0": float,
        "weight_w50": float,
        "time_cutoff_minutes": float,
        "bootstrap_resamples": int,
        "bootstrap_level": float,
        "stratified_bootstrap": bool,
        "seed": int,
    }

    @classmethod
    def from_mapping(cls, mapping) -> "RunConfig":
        """Build a configuration from a flat key-value document.

        Unknown keys are rejected so typos cannot silently fall back to
        defaults.  ``gamma_method`` accepts ``fixed:VALUE`` to carry
        the fixed share inline; ``weighting`` is ``on`` or ``off``.
        """
        unknown = sorted(set(mapping) - set(cls._KEYS))
        if unknown:
            raise ConfigError(f"unknown config key {unknown[0]!r}")
        if "design_p" not in mapping:
            raise ConfigError("config must set design_p")

        kwargs: dict = {}
        for key, value in mapping.items():
            want = cls._KEYS[key]
            if want is float and isinstance(value, (int, float)) and not isinstance(value, bool):
                value = float(value)
            if want in (int, str, bool) and not isinstance(value, want):
                raise ConfigError(
                    f"config key {key!r} must be a {want.__name__}, got {value!r}"
                )
            if want is float and not isinstance(value, float):
                raise ConfigError(
                    f"config key {key!r} must be a number, got {value!r}"
                )
            kwargs[key] = value

        method = kwargs.get("gamma_method", "delta_pi")
        if isinstance(method, str) and method.startswith("fixed:"):
            try:
                kwargs["fixed_gamma"] = float(method.split(":", 1)[1])
            except ValueError:
                raise ConfigError(
                    f"gamma_method {method!r} does not carry a numeric share"
                ) from None
            kwargs["gamma_method"] = "fixed"

        switch = kwargs.pop("weighting", "off")
        if switch not in ("on", "off"):
            raise ConfigError(
                f"weighting must be 'on' or 'off', got {switch!r}"
            )
        kwargs["weighting"] = switch == "on"
        return cls(**kwargs)

    def echo(self) -> dict:
        """The configuration as a flat dict for the provenance block."""
        method = self.gamma_method
        if method == "fixed":
            method = f"fixed:{self.fixed_gamma}"
        return {
            "design_p": self.design_p,
            "base_model": self.base_model,
            "gamma_method": method,
            "weighting": "on" if self.weighting else "off",
            "weight_w0": self.weight_w0,
            "weight_w50": self.weight_w50,
            "time_cutoff_minutes": self.time_cutoff_minutes,
            "bootstrap_resamples": self.bootstrap_resamples,
            "bootstrap_level": self.bootstrap_level,
            "stratified_bootstrap": self.stratified_bootstrap,
            "seed": self.seed,
        }


# -- report blocks ---------------------------------------------------


@dataclass(frozen=True)
class LadderRow:
    """One model of the ladder: its fit and, optionally, intervals."""

    label: str
    pi_hat: float
    pct_of_ecwm: float
    theta_hat: float | None
    g2: float | None
    df: int | None
    p_value: float | None
    pi: IntervalEstimate | None = None
    theta: IntervalEstimate | None = None


@dataclass(frozen=True)
class CalibrationBlock:
    """How the coin-flipper share was obtained from the control item."""

    method: str
    n_control: int
    n_incorrect: int
    error_rate: float
    doubled_error_rate: float
    gamma_hat: float
    phi_implied: float | None
    pi_in: float | None
    pi_out: float | None
    delta_pi: float | None
    pi_ra_target: float | None
    theta_hat: float | None
    flags: tuple[str, ...]


@dataclass(frozen=True)
class WeightBlock:
    """The solved weight curve used by the ``+ weights`` row."""

    t0: float
    t50: float
    beta0: float
    beta: float
    w0: float
    w50: float
    cutoff: float
    n_used: int
    n_excluded: int


@dataclass(frozen=True)
class AttritionBlock:
    """Rows lost to each filter, for the report's footnotes."""

    n_rows: int
    n_control_missing: int
    n_control_incorrect: int | None
    n_time_missing: int
    n_time_excluded: int | None


@dataclass(frozen=True)
class Report:
    """Everything ``render_text`` and ``render_json`` need."""

    ladder: tuple[LadderRow, ...]
    calibration: CalibrationBlock | None
    weights: WeightBlock | None
    attrition: AttritionBlock
    config: dict
    seed: int
    version: str


# -- the pipeline ----------------------------------------------------


@dataclass(frozen=True)
class _LadderFits:
    gamma_hat: float
    estimate: GammaEstimate | None
    ecwm: FitResult
    one: FitResult
    ra: FitResult
    weighted: WeightedFit | None


def _require_control(records: RecordSet, method: str) -> None:
    if not records.has_control.any():
        raise ConfigError(
            f"gamma_method {method!r} requires the control columns "
            "(control_answer, control_a_true, control_b_prob)"
        )


def _calibrate(records: RecordSet, config: RunConfig):
    """The calibrated share and, where applicable, its estimate record."""
    method = config.gamma_method
    if method == "none":
        return 0.0, None
    if method == "fixed":
        return float(config.fixed_gamma), None
    _require_control(records, method)
    if method == "naive_2ec":
        estimate = gamma_naive(control_error_rate(records))
    else:
        estimate = gamma_delta_pi(records, config.design, base_model=config.base_kind)
    return estimate.gamma_hat, estimate


def _fit_ladder(records: RecordSet, config: RunConfig) -> _LadderFits:
    gamma_hat, estimate = _calibrate(records, config)
    design = config.design
    counts = ResponseCounts.from_records(records)
    ra_spec = ModelSpec(config.base_kind.ra_variant(), gamma_hat)
    weighted = None
    if config.weighting:
        if not records.has_time.any():
            raise ConfigError(
                "weighting requires the time_minutes column"
            )
        weighted = weighted_fit(
            records,
            design,
            ra_spec,
            w0=config.weight_w0,
            w50=config.weight_w50,
            cutoff=config.time_cutoff_minutes,
        )
    return _LadderFits(
        gamma_hat=gamma_hat,
        estimate=estimate,
        ecwm=fit_mle(ModelSpec.ecwm(), counts, design),
        one=fit_mle(ModelSpec.one_sayers(), counts, design),
        ra=fit_mle(ra_spec, counts, design),
        weighted=weighted,
    )


def _slots(config: RunConfig) -> list[str]:
    """Which statistics the bootstrap vector carries, in order.

    Laws without an always-DIFFERENT share contribute no theta slot;
    the layout depends only on the configuration, so it is identical
    across resamples.
    """
    slots = ["ecwm.pi", "one.pi", "one.theta", "ra.pi"]
    ra_kind = config.base_kind.ra_variant()
    if ra_kind.has_theta:
        slots.append("ra.theta")
    if config.weighting:
        slots.append("w.pi")
        if ra_kind.has_theta:
            slots.append("w.theta")
    return slots


def _ladder_vector(fits: _LadderFits, slots: list[str]) -> list[float]:
    values = {
        "ecwm.pi": fits.ecwm.pi_hat,
        "one.pi": fits.one.pi_hat,
        "one.theta": fits.one.theta_hat,
        "ra.pi": fits.ra.pi_hat,
        "ra.theta": fits.ra.theta_hat,
    }
    if fits.weighted is not None:
        values["w.pi"] = fits.weighted.fit.pi_hat
        values["w.theta"] = fits.weighted.fit.theta_hat
    return [
        np.nan if values[slot] is None else float(values[slot]) for slot in slots
    ]


def _calibration_block(fits: _LadderFits, records: RecordSet) -> CalibrationBlock | None:
    estimate = fits.estimate
    if estimate is None:
        return None
    outcome = control_error_rate(records)
    flags = tuple(
        name
        for name in (
            "truncated",
            "negative_delta",
            "boundary",
            "degenerate",
            "exceeds_naive",
        )
        if getattr(estimate, name)
    )
    return CalibrationBlock(
        method=estimate.method,
        n_control=outcome.n_control,
        n_incorrect=outcome.n_incorrect,
        error_rate=outcome.error_rate,
        doubled_error_rate=2.0 * outcome.error_rate,
        gamma_hat=estimate.gamma_hat,
        phi_implied=estimate.phi_implied,
        pi_in=estimate.pi_in,
        pi_out=estimate.pi_out,
        delta_pi=estimate.delta_pi,
        pi_ra_target=estimate.pi_ra_target,
        theta_hat=estimate.theta_hat,
        flags=flags,
    )


def _weight_block(fits: _LadderFits, config: RunConfig) -> WeightBlock | None:
    if fits.weighted is None:
        return None
    params = fits.weighted.params
    return WeightBlock(
        t0=params.t0,
        t50=params.t50,
        beta0=params.beta0,
        beta=params.beta,
        w0=params.w0,
        w50=params.w50,
        cutoff=config.time_cutoff_minutes,
        n_used=fits.weighted.n_used,
        n_excluded=fits.weighted.n_excluded,
    )


def _attrition_block(
    fits: _LadderFits, records: RecordSet, calibration: CalibrationBlock | None
) -> AttritionBlock:
    n = len(records)
    n_control = int(records.has_control.sum())
    return AttritionBlock(
        n_rows=n,
        n_control_missing=n - n_control,
        n_control_incorrect=None if calibration is None else calibration.n_incorrect,
        n_time_missing=n - int(records.has_time.sum()),
        n_time_excluded=None if fits.weighted is None else fits.weighted.n_excluded,
    )


def run_pipeline(records: RecordSet, config: RunConfig) -> Report:
    """Run calibration and the four-model ladder, returning a report.

    With ``bootstrap_resamples > 0``, every resample re-runs this same
    chain — share calibration, weight solving, each fit — and the rows
    carry percentile intervals for both the prevalence and, where
    estimated, the always-DIFFERENT share.
    """
    fits = _fit_ladder(records, config)

    slots = _slots(config)
    intervals: dict[str, IntervalEstimate | None] = {slot: None for slot in slots}
    boot = config.bootstrap
    if boot is not None:
        estimates = bootstrap_vector(
            records,
            lambda resample: _ladder_vector(_fit_ladder(resample, config), slots),
            boot,
        )
        intervals = dict(zip(slots, estimates))

    pi_ecwm = fits.ecwm.pi_hat

    def pct(pi_hat: float) -> float:
        return 100.0 * pi_hat / pi_ecwm if pi_ecwm > 0.0 else np.nan

    def row(label, fit, pi_iv, theta_iv) -> LadderRow:
        return LadderRow(
            label=label,
            pi_hat=fit.pi_hat,
            pct_of_ecwm=pct(fit.pi_hat),
            theta_hat=fit.theta_hat,
            g2=fit.g2,
            df=fit.df,
            p_value=fit.p_value,
            pi=pi_iv,
            theta=theta_iv,
        )

    ladder = [
        row("ECWM", fits.ecwm, intervals["ecwm.pi"], None),
        row("+ one-saying", fits.one, intervals["one.pi"], intervals["one.theta"]),
        row("+ ra", fits.ra, intervals["ra.pi"], intervals.get("ra.theta")),
    ]
    if fits.weighted is not None:
        ladder.append(
            row(
                "+ weights",
                fits.weighted.fit,
                intervals["w.pi"],
                intervals.get("w.theta"),
            )
        )

    calibration = _calibration_block(fits, records)
    return Report(
        ladder=tuple(ladder),
        calibration=calibration,
        weights=_weight_block(fits, config),
        attrition=_attrition_block(fits, records, calibration),
        config=config.echo(),
        seed=config.seed,
        version=_package_version(),
    )


def _package_version() -> str:
    from crosswise import __version__

    return __version__


# -- rendering -------------------------------------------------------


def _fmt(value, places=3) -> str:
    if value is None:
        return "-"
    if isinstance(value, float) and not np.isfinite(value):
        return "-"
    return f"{value:.{places}f}"


def _fmt_interval(interval: IntervalEstimate | None) -> str:
    if interval is None:
        return "-"
    note = f" ({interval.n_failed} failed)" if interval.n_failed else ""
    return f"[{interval.lower:.3f}, {interval.upper:.3f}]{note}"


def render_text(report: Report) -> str:
    """A plain-text report: ladder table first, then the footnotes."""
    lines = [
        f"crosswise {report.version}",
        "",
        "Model ladder",
        "------------",
    ]
    header = (
        f"{'model':<14} {'pi':>7} {'CI':<22} {'% of ECWM':>9} "
        f"{'theta':>7} {'G2':>8} {'df':>3} {'p':>7}"
    )
    lines.append(header)
    for entry in report.ladder:
        lines.append(
            f"{entry.label:<14} {_fmt(entry.pi_hat):>7} "
            f"{_fmt_interval(entry.pi):<22} {_fmt(entry.pct_of_ecwm, 1):>9} "
            f"{_fmt(entry.theta_hat):>7} {_fmt(entry.g2):>8} "
            f"{entry.df if entry.df is not None else '-':>3} "
            f"{_fmt(entry.p_value):>7}"
        )
        if entry.theta is not None:
            lines.append(f"{'':<14} {'theta CI':>7} {_fmt_interval(entry.theta):<22}")

    calibration = report.calibration
    lines += ["", "Calibration", "-----------"]
    if calibration is None:
        method = report.config["gamma_method"]
        lines.append(f"gamma_method = {method} (no control calibration run)")
    else:
        lines.append(f"method           {calibration.method}")
        lines.append(f"control rows     {calibration.n_control}")
        lines.append(f"error rate e_c   {_fmt(calibration.error_rate)}")
        lines.append(f"2 e_c            {_fmt(calibration.doubled_error_rate)}")
        lines.append(f"gamma_hat        {_fmt(calibration.gamma_hat)}")
        lines.append(f"implied phi      {_fmt(calibration.phi_implied)}")
        if calibration.pi_in is not None:
            lines.append(f"pi_in            {_fmt(calibration.pi_in)}")
            lines.append(f"pi_out           {_fmt(calibration.pi_out)}")
            lines.append(f"delta_pi         {_fmt(calibration.delta_pi)}")
            lines.append(f"pi_ra target     {_fmt(calibration.pi_ra_target)}")
            lines.append(f"theta_hat        {_fmt(calibration.theta_hat)}")
        if calibration.flags:
            lines.append(f"flags            {', '.join(calibration.flags)}")

    weights = report.weights
    if weights is not None:
        lines += ["", "Time weighting", "--------------"]
        lines.append(
            f"cutoff {_fmt(weights.cutoff, 1)} min; "
            f"{weights.n_used} rows kept, {weights.n_excluded} excluded"
        )
        lines.append(
            f"anchors t0={_fmt(weights.t0, 2)} t50={_fmt(weights.t50, 2)} "
            f"w0={_fmt(weights.w0, 2)} w50={_fmt(weights.w50, 2)}"
        )
        lines.append(
            f"curve   beta0={_fmt(weights.beta0, 4)} beta={_fmt(weights.beta, 4)}"
        )

    attrition = report.attrition
    lines += ["", "Attrition", "---------"]
    lines.append(f"rows               {attrition.n_rows}")
    lines.append(f"without control    {attrition.n_control_missing}")
    if attrition.n_control_incorrect is not None:
        lines.append(f"control incorrect  {attrition.n_control_incorrect}")
    lines.append(f"without time       {attrition.n_time_missing}")
    if attrition.n_time_excluded is not None:
        lines.append(f"over time cutoff   {attrition.n_time_excluded}")

    lines += ["", "Provenance", "----------"]
    lines.append(f"seed     {report.seed}")
    lines.append(f"version  {report.version}")
    for key in sorted(report.config):
        value = report.config[key]
        if isinstance(value, bool):
            # Config files are TOML, whose booleans are lowercase; keep
            # the echoed lines paste-able as-is.
            value = "true" if value else "false"
        lines.append(f"config   {key} = {value}")
    return "\n".join(lines) + "\n"


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.generic):
        return value.item()
    return value


def render_json(report: Report) -> dict:
    """The report as a JSON-ready dict, at full precision."""
    return _plain(dataclasses.asdict(report))
