"""Tests for run configuration, the model ladder, and report rendering."""

import json

import numpy as np
import pytest

from crosswise.bootstrapping import BootstrapConfig
from crosswise.errors import ConfigError
from crosswise.models import DesignParams
from crosswise.records import DIFFERENT, SAME, RecordSet
from crosswise.reporting import (
    RunConfig,
    render_json,
    render_text,
    run_pipeline,
)
from crosswise.simulate import PopulationSpec, TimeModel, simulate

DESIGN = DesignParams(0.2)
TIMES = TimeModel(median_minutes=8.0, random_median_minutes=2.0, sigma=0.4)


def _simulated(n=20_000, seed=1, **kwargs):
    defaults = dict(pi=0.25, theta=0.1, gamma=0.0, phi=0.0,
                    design=DESIGN, time_model=TIMES)
    defaults.update(kwargs)
    return simulate(PopulationSpec(n=n, **defaults), seed=seed)


def _config(**overrides):
    mapping = {"design_p": 0.2}
    mapping.update(overrides)
    return RunConfig.from_mapping(mapping)


class TestRunConfig:
    def test_defaults(self):
        config = _config()
        assert config.base_model == "one_sayers"
        assert config.gamma_method == "delta_pi"
        assert not config.weighting
        assert config.time_cutoff_minutes == 15.0
        assert config.bootstrap is None

    def test_bootstrap_property_mirrors_the_config(self):
        config = _config(
            bootstrap_resamples=500,
            bootstrap_level=0.9,
            seed=7,
            stratified_bootstrap=True,
        )
        assert config.bootstrap == BootstrapConfig(
            n_resamples=500, level=0.9, seed=7, stratified=True
        )

    def test_fixed_share_parses_inline(self):
        config = _config(gamma_method="fixed:0.15")
        assert config.gamma_method == "fixed"
        assert config.fixed_gamma == 0.15

    def test_weighting_switch(self):
        assert _config(weighting="on").weighting
        assert not _config(weighting="off").weighting

    def test_echo_round_trips(self):
        for overrides in (
            {},
            {"gamma_method": "fixed:0.2", "weighting": "on", "seed": 9},
            {"gamma_method": "naive_2ec", "bootstrap_resamples": 50},
        ):
            config = _config(**overrides)
            assert RunConfig.from_mapping(config.echo()) == config

    @pytest.mark.parametrize(
        "overrides,match",
        [
            ({"design_p": 0.5}, "0.5"),
            ({"base_model": "cwm"}, "base_model"),
            ({"gamma_method": "guess"}, "gamma_method"),
            ({"gamma_method": "fixed:1.5"}, "fixed"),
            ({"gamma_method": "fixed:soon"}, "numeric"),
            ({"weighting": "maybe"}, "weighting"),
            ({"weight_w0": 0.0}, "weight_w0"),
            ({"weight_w50": 1.0}, "weight_w50"),
            ({"time_cutoff_minutes": 0.0}, "time_cutoff"),
            ({"bootstrap_resamples": -1}, "bootstrap_resamples"),
            ({"bootstrap_level": 1.0}, "bootstrap_level"),
            ({"seed": -1}, "seed"),
            ({"mystery_key": 1}, "unknown config key"),
            ({"base_model": 7}, "must be a str"),
            ({"design_p": "wide"}, "must be a number"),
        ],
    )
    def test_bad_values_are_configuration_errors(self, overrides, match):
        with pytest.raises(ConfigError, match=match):
            _config(**overrides)

    def test_missing_design_is_rejected(self):
        with pytest.raises(ConfigError, match="design_p"):
            RunConfig.from_mapping({"seed": 1})

    def test_fixed_share_requires_the_fixed_method(self):
        with pytest.raises(ConfigError, match="fixed"):
            RunConfig(design_p=0.2, fixed_gamma=0.1)


class TestLadder:
    def test_null_corrections_recover_the_truth(self):
        # No coin-flippers in the population: every corrected row sits
        # at the true prevalence, while the uncorrected first row shows
        # exactly the always-DIFFERENT bias theta * (.5 - pi).
        records = _simulated(seed=1)
        report = run_pipeline(records, _config(weighting="on"))
        pis = [entry.pi_hat for entry in report.ladder]
        assert [entry.label for entry in report.ladder] == [
            "ECWM",
            "+ one-saying",
            "+ ra",
            "+ weights",
        ]
        assert pis[0] == pytest.approx(0.275, abs=0.015)
        for value in pis[1:]:
            assert value == pytest.approx(0.25, abs=0.015)
        assert report.calibration.gamma_hat == pytest.approx(0.0, abs=0.01)

    def test_fast_coin_flippers_walk_the_ladder_down(self):
        records = _simulated(
            n=4_000, seed=9, gamma=0.15, phi=0.05, link_random_to_speed=True
        )
        report = run_pipeline(records, _config(weighting="on"))
        pis = [entry.pi_hat for entry in report.ladder]
        assert pis[0] > pis[1] > pis[2] > pis[3]
        pcts = [entry.pct_of_ecwm for entry in report.ladder]
        assert pcts[0] == 100.0
        assert pcts[0] > pcts[1] > pcts[2] > pcts[3]

    def test_zero_fixed_share_is_the_identity_correction(self):
        records = _simulated(n=5_000, seed=1)
        report = run_pipeline(records, _config(gamma_method="fixed:0"))
        one, ra = report.ladder[1], report.ladder[2]
        assert ra.pi_hat == pytest.approx(one.pi_hat, abs=1e-12)
        assert ra.theta_hat == pytest.approx(one.theta_hat, abs=1e-12)
        assert report.calibration is None

    def test_degrees_of_freedom_down_the_ladder(self):
        records = _simulated(n=5_000, seed=2)
        report = run_pipeline(records, _config(weighting="on"))
        ecwm, one, ra, weighted = report.ladder
        assert ecwm.df == 1
        assert one.df == 0
        assert one.g2 == pytest.approx(0.0, abs=1e-6)
        assert one.p_value == 1.0
        assert ra.df == 0
        assert weighted.df == 0
        assert ecwm.theta_hat is None

    def test_base_ecwm_keeps_its_own_arm_free_df(self):
        records = _simulated(n=5_000, seed=2, gamma=0.1, phi=0.0)
        report = run_pipeline(
            records,
            _config(base_model="ecwm", bootstrap_resamples=40, seed=3),
        )
        ra = report.ladder[2]
        assert ra.df == 1
        assert ra.theta_hat is None
        assert ra.pi is not None
        assert ra.theta is None

    def test_naive_method_doubles_the_error_rate(self):
        records = _simulated(n=20_000, seed=4, gamma=0.1, phi=0.05)
        report = run_pipeline(records, _config(gamma_method="naive_2ec"))
        calibration = report.calibration
        assert calibration.method == "naive_2ec"
        assert calibration.gamma_hat == pytest.approx(
            calibration.doubled_error_rate, abs=1e-12
        )
        # expected error rate .5*gamma + phi = .1, so the naive share is .2
        assert calibration.gamma_hat == pytest.approx(0.2, abs=0.01)
        assert calibration.pi_in is None

    def test_delta_pi_block_carries_the_decomposition(self):
        records = _simulated(n=20_000, seed=4, gamma=0.1, phi=0.05)
        report = run_pipeline(records, _config())
        calibration = report.calibration
        assert calibration.method == "delta_pi"
        assert calibration.pi_ra_target == pytest.approx(
            calibration.pi_out - calibration.delta_pi, abs=1e-12
        )
        assert calibration.n_control == 20_000
        assert report.attrition.n_control_incorrect == calibration.n_incorrect

    def test_truncated_share_is_flagged(self):
        n = 200
        records = RecordSet(
            answer=np.tile([DIFFERENT, SAME], n // 2),
            subsample=np.tile([1, 2], n // 2),
            control_answer=np.array(
                [DIFFERENT] * 160 + [SAME] * 40
            ),  # correct reply is SAME
            control_a_true=np.ones(n, dtype=int),
            control_b_prob=np.ones(n, dtype=int),
        )
        report = run_pipeline(records, _config(gamma_method="naive_2ec"))
        assert report.calibration.gamma_hat == 1.0
        assert "truncated" in report.calibration.flags

    def test_missing_control_is_a_configuration_error(self):
        records = RecordSet(answer=[DIFFERENT, SAME], subsample=[1, 2])
        with pytest.raises(ConfigError, match="control"):
            run_pipeline(records, _config())

    def test_weighting_without_times_is_a_configuration_error(self):
        records = RecordSet(
            answer=[DIFFERENT, SAME, SAME, DIFFERENT],
            subsample=[1, 2, 1, 2],
        )
        with pytest.raises(ConfigError, match="time_minutes"):
            run_pipeline(
                records, _config(gamma_method="none", weighting="on")
            )


class TestBootstrapIntegration:
    def test_reports_are_deterministic(self):
        records = _simulated(n=2_000, seed=5, gamma=0.15, phi=0.05,
                             link_random_to_speed=True)
        config = _config(weighting="on", bootstrap_resamples=60, seed=17)
        first = render_json(run_pipeline(records, config))
        second = render_json(run_pipeline(records, config))
        assert first == second

    def test_rows_carry_intervals_where_estimated(self):
        records = _simulated(n=2_000, seed=5, gamma=0.15, phi=0.05,
                             link_random_to_speed=True)
        config = _config(weighting="on", bootstrap_resamples=60, seed=17)
        report = run_pipeline(records, config)
        ecwm, one, ra, weighted = report.ladder
        assert ecwm.pi is not None and ecwm.theta is None
        for entry in (one, ra, weighted):
            assert entry.pi.lower <= entry.pi.upper
            assert entry.theta.lower <= entry.theta.upper
        assert ecwm.pi.point == ecwm.pi_hat


class TestRendering:
    def _report(self, **overrides):
        records = _simulated(n=3_000, seed=6, gamma=0.1, phi=0.05,
                             link_random_to_speed=True)
        return run_pipeline(records, _config(weighting="on", **overrides))

    def test_text_report_shape(self):
        text = render_text(self._report())
        assert "Model ladder" in text
        assert "% of ECWM" in text
        assert "100.0" in text
        assert "+ weights" in text
        assert "Calibration" in text
        assert "Time weighting" in text
        assert "Attrition" in text
        assert "Provenance" in text
        assert text.endswith("\n")

    def test_json_report_is_serialisable(self):
        report = self._report(bootstrap_resamples=30, seed=2)
        payload = json.dumps(render_json(report))
        back = json.loads(payload)
        assert [row["label"] for row in back["ladder"]] == [
            "ECWM",
            "+ one-saying",
            "+ ra",
            "+ weights",
        ]
        assert back["config"]["weighting"] == "on"
        assert back["version"] == report.version
        row = back["ladder"][1]
        assert isinstance(row["pi_hat"], float)
        assert isinstance(row["pi"]["n_failed"], int)

    def test_no_calibration_note_when_method_is_none(self):
        records = _simulated(n=500, seed=3)
        report = run_pipeline(records, _config(gamma_method="none"))
        assert report.calibration is None
        text = render_text(report)
        assert "no control calibration run" in text
