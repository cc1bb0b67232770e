"""Command-line front end.

Four subcommands cover the workflow end to end:

``crosswise fit``
    Ingest a survey CSV and a config, run the control-item calibration
    and the four-model ladder, print the text report, and optionally
    write the full-precision JSON report.

``crosswise simulate``
    Generate a synthetic survey CSV from population parameters in a
    config file, for power studies and end-to-end checks.

``crosswise sensitivity``
    Refit the weighted estimate over the 3x3 grid of weight anchors to
    show how much the conclusion depends on the anchor choice.

``crosswise bias-surface``
    Emit the expected naive estimate over a grid of true prevalence,
    always-DIFFERENT share, and coin-flipper share, as plot-ready CSV.

Exit codes: 0 success, 2 configuration error, 3 data validation
error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, CrosswiseError, DataError, NumericalError
from .estimation import expected_bias
from .io import read_config, read_survey, write_survey
from .models import DesignParams, ModelSpec
from .reporting import RunConfig, render_json, render_text, run_pipeline
from .simulate import PopulationSpec, TimeModel, simulate
from .timeweights import sensitivity_grid

__all__ = ["main"]

_EXIT_CONFIG = 2
_EXIT_DATA = 3
_EXIT_NUMERICAL = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crosswise",
        description="Crosswise-design prevalence estimation with "
        "corrections for one-saying and random answering.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="calibrate and run the model ladder")
    fit.add_argument("--survey", required=True, help="survey CSV path")
    fit.add_argument("--config", required=True, help="config file path")
    fit.add_argument("--out", help="write the JSON report here")
    _add_overrides(fit)

    sim = sub.add_parser("simulate", help="write a synthetic survey CSV")
    sim.add_argument("--config", required=True, help="population config path")
    sim.add_argument("--out", required=True, help="survey CSV to write")
    sim.add_argument("--seed", type=int, help="override the config seed")

    sens = sub.add_parser(
        "sensitivity", help="weighted estimates over the anchor grid"
    )
    sens.add_argument("--survey", required=True, help="survey CSV path")
    sens.add_argument("--config", required=True, help="config file path")
    sens.add_argument("--out", help="write the JSON grid here")
    _add_overrides(sens)

    bias = sub.add_parser(
        "bias-surface", help="expected naive estimate over a parameter grid"
    )
    bias.add_argument("--out", required=True, help="CSV to write")
    return parser


def _add_overrides(command: argparse.ArgumentParser) -> None:
    command.add_argument("--seed", type=int, help="override the config seed")
    command.add_argument(
        "--bootstrap",
        type=int,
        metavar="N",
        help="override the number of bootstrap resamples (0 disables)",
    )
    command.add_argument(
        "--time-cutoff",
        type=float,
        help="override the time cutoff in minutes",
    )
    command.add_argument(
        "--gamma-method",
        help="override the calibration method "
        "(none, naive_2ec, delta_pi, fixed:VALUE)",
    )
    command.add_argument(
        "--weights",
        metavar="W0,W50",
        help="override the weight anchors and switch weighting on",
    )


def _run_config(args) -> RunConfig:
    mapping = dict(read_config(args.config))
    if args.seed is not None:
        mapping["seed"] = args.seed
    if args.bootstrap is not None:
        mapping["bootstrap_resamples"] = args.bootstrap
    if args.time_cutoff is not None:
        mapping["time_cutoff_minutes"] = args.time_cutoff
    if args.gamma_method is not None:
        mapping["gamma_method"] = args.gamma_method
    if args.weights is not None:
        parts = args.weights.split(",")
        if len(parts) != 2:
            raise ConfigError(
                f"--weights expects two comma-separated anchors, got {args.weights!r}"
            )
        try:
            w0, w50 = (float(part) for part in parts)
        except ValueError:
            raise ConfigError(
                f"--weights anchors must be numbers, got {args.weights!r}"
            ) from None
        mapping["weighting"] = "on"
        mapping["weight_w0"] = w0
        mapping["weight_w50"] = w50
    return RunConfig.from_mapping(mapping)


def _cmd_fit(args) -> int:
    records = read_survey(args.survey)
    config = _run_config(args)
    report = run_pipeline(records, config)
    sys.stdout.write(render_text(report))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(render_json(report), handle, indent=2)
            handle.write("\n")
    return 0


_POPULATION_KEYS = {
    "n": int,
    "pi": float,
    "theta": float,
    "gamma": float,
    "phi": float,
    "design_p": float,
    "subsample_split": float,
    "force_balance": bool,
    "seed": int,
    "times": str,
    "time_median_minutes": float,
    "time_random_median_minutes": float,
    "time_sigma": float,
    "time_slow_fraction": float,
    "time_slow_multiplier": float,
    "link_random_to_speed": bool,
}


def _population_config(mapping) -> tuple[PopulationSpec, int]:
    unknown = sorted(set(mapping) - set(_POPULATION_KEYS))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}")
    for required in ("n", "pi", "design_p"):
        if required not in mapping:
            raise ConfigError(f"config must set {required}")
    values = {}
    for key, value in mapping.items():
        want = _POPULATION_KEYS[key]
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, want) or (
            want in (int, float) and isinstance(value, bool)
        ):
            raise ConfigError(
                f"config key {key!r} must be a {want.__name__}, got {value!r}"
            )
        values[key] = value

    times = values.pop("times", "on")
    if times not in ("on", "off"):
        raise ConfigError(f"times must be 'on' or 'off', got {times!r}")
    if times == "off":
        time_model = None
        for key in values:
            if key.startswith("time_"):
                raise ConfigError(f"{key} is meaningless with times = 'off'")
    else:
        time_model = TimeModel(
            median_minutes=values.pop("time_median_minutes", 20.0),
            random_median_minutes=values.pop("time_random_median_minutes", 6.0),
            sigma=values.pop("time_sigma", 0.4),
            slow_fraction=values.pop("time_slow_fraction", 0.0),
            slow_multiplier=values.pop("time_slow_multiplier", 10.0),
        )
    seed = values.pop("seed", 0)
    spec = PopulationSpec(
        n=values["n"],
        pi=values["pi"],
        theta=values.get("theta", 0.0),
        gamma=values.get("gamma", 0.0),
        phi=values.get("phi", 0.0),
        design=DesignParams(values["design_p"]),
        subsample_split=values.get("subsample_split", 0.5),
        force_balance=values.get("force_balance", False),
        time_model=time_model,
        link_random_to_speed=values.get("link_random_to_speed", False),
    )
    return spec, seed


def _cmd_simulate(args) -> int:
    mapping = dict(read_config(args.config))
    if args.seed is not None:
        mapping["seed"] = args.seed
    spec, seed = _population_config(mapping)
    records = simulate(spec, seed=seed)
    write_survey(records, args.out)
    sys.stdout.write(f"wrote {len(records)} rows to {args.out} (seed {seed})\n")
    return 0


def _cmd_sensitivity(args) -> int:
    records = read_survey(args.survey)
    config = _run_config(args)
    if not records.has_time.any():
        raise ConfigError("the anchor grid requires the time_minutes column")

    from .reporting import _calibrate  # same calibration as cmd_fit

    gamma_hat, _ = _calibrate(records, config)
    grid = sensitivity_grid(
        records,
        config.design,
        ModelSpec(config.base_kind, None),
        gamma_hat,
        cutoff=config.time_cutoff_minutes,
    )

    lines = [
        f"weighted prevalence by anchors (share fixed at {gamma_hat:.3f});",
        "default cell marked *",
        "",
        "w0 \\ w50 " + "".join(f"{w50:>10}" for w50 in grid.w50_values),
    ]
    for i, w0 in enumerate(grid.w0_values):
        cells = []
        for j, w50 in enumerate(grid.w50_values):
            value = grid.pi_hat[i, j]
            text = "nan" if np.isnan(value) else f"{value:.3f}"
            if (w0, w50) == (config.weight_w0, config.weight_w50):
                text += "*"
            cells.append(f"{text:>10}")
        lines.append(f"{w0:>8} " + "".join(cells))
    for note in grid.notes:
        lines.append(f"note: {note}")
    sys.stdout.write("\n".join(lines) + "\n")

    if args.out:
        payload = {
            "gamma_hat": gamma_hat,
            "w0_values": list(grid.w0_values),
            "w50_values": list(grid.w50_values),
            "pi_hat": [
                [None if np.isnan(v) else v for v in row] for row in grid.pi_hat
            ],
            "notes": list(grid.notes),
        }
        with open(args.out, "w", encoding="utf-8") as handle:
            json.dump(payload, handle, indent=2)
            handle.write("\n")
    return 0


def _cmd_bias_surface(args) -> int:
    pis = [round(0.05 * i, 2) for i in range(0, 11)]
    thetas = [round(0.05 * i, 2) for i in range(0, 6)]
    gammas = [round(0.05 * i, 2) for i in range(0, 21)]
    with open(args.out, "w", encoding="utf-8", newline="") as handle:
        handle.write("pi,theta,gamma,expected_pi\n")
        n_rows = 0
        for pi in pis:
            for theta in thetas:
                for gamma in gammas:
                    if theta + gamma > 1.0 + 1e-12:
                        continue
                    expected, _ = expected_bias(pi, theta, gamma)
                    handle.write(f"{pi},{theta},{gamma},{expected!r}\n")
                    n_rows += 1
    sys.stdout.write(f"wrote {n_rows} rows to {args.out}\n")
    return 0


_COMMANDS = {
    "fit": _cmd_fit,
    "simulate": _cmd_simulate,
    "sensitivity": _cmd_sensitivity,
    "bias-surface": _cmd_bias_surface,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return _EXIT_CONFIG
    except DataError as exc:
        sys.stderr.write(f"data error: {exc}\n")
        return _EXIT_DATA
    except NumericalError as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return _EXIT_NUMERICAL
    except CrosswiseError as exc:  # pragma: no cover - base-class safety net
        sys.stderr.write(f"error: {exc}\n")
        return _EXIT_NUMERICAL
    except OSError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return _EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
