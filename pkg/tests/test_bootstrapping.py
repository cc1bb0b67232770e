"""Tests for bootstrap percentile confidence intervals."""

import numpy as np
import pytest

from crosswise.bootstrapping import (
    BootstrapConfig,
    IntervalEstimate,
    _percentile_bounds,
    bootstrap_ci,
    bootstrap_vector,
)
from crosswise.errors import DataError, NumericalError, ParameterError
from crosswise.estimation import ResponseCounts, moment_onesayers_ra
from crosswise.models import DesignParams
from crosswise.records import RecordSet
from crosswise.simulate import PopulationSpec, simulate

DESIGN = DesignParams(0.2)


def _records(n=300, seed=9, **kwargs):
    spec = PopulationSpec(n=n, pi=0.25, theta=0.1, design=DESIGN, **kwargs)
    return simulate(spec, seed=seed)


def _moment_pi(records):
    counts = ResponseCounts.from_records(records)
    return moment_onesayers_ra(counts, DESIGN, gamma=0.0).pi_hat


class TestPercentileBounds:
    def test_hand_built_vector_at_ninety_percent(self):
        values = np.arange(1.0, 21.0)
        assert _percentile_bounds(values, 0.90) == (1.0, 19.0)

    def test_hand_built_vector_at_ninety_five_percent(self):
        values = np.arange(1.0, 21.0)
        assert _percentile_bounds(values, 0.95) == (1.0, 20.0)

    def test_hundred_values(self):
        values = np.arange(1.0, 101.0)
        # ceil(.025 * 100) = 3 and ceil(.975 * 100) = 98, 1-based.
        assert _percentile_bounds(values, 0.95) == (3.0, 98.0)

    def test_interior_level_on_odd_count(self):
        values = np.arange(1.0, 8.0)
        # alpha = .5: ranks ceil(1.75) = 2 and ceil(5.25) = 6.
        assert _percentile_bounds(values, 0.50) == (2.0, 6.0)

    def test_input_order_is_irrelevant(self):
        rng = np.random.default_rng(3)
        values = np.arange(1.0, 101.0)
        shuffled = rng.permutation(values)
        assert _percentile_bounds(shuffled, 0.95) == _percentile_bounds(
            values, 0.95
        )

    def test_single_success_collapses_the_interval(self):
        assert _percentile_bounds(np.array([0.4]), 0.95) == (0.4, 0.4)


class TestBootstrapCi:
    def test_constant_pipeline_gives_a_degenerate_interval(self):
        result = bootstrap_ci(
            _records(), lambda r: 0.2, BootstrapConfig(n_resamples=50, seed=1)
        )
        assert result == IntervalEstimate(
            point=0.2, lower=0.2, upper=0.2, n_failed=0
        )

    def test_same_seed_is_bit_identical(self):
        records = _records()
        config = BootstrapConfig(n_resamples=200, seed=42)
        a = bootstrap_ci(records, _moment_pi, config)
        b = bootstrap_ci(records, _moment_pi, config)
        assert a == b

    def test_different_seeds_differ(self):
        records = _records()
        a = bootstrap_ci(records, _moment_pi, BootstrapConfig(n_resamples=200, seed=1))
        b = bootstrap_ci(records, _moment_pi, BootstrapConfig(n_resamples=200, seed=2))
        assert (a.lower, a.upper) != (b.lower, b.upper)

    def test_interval_brackets_the_truth_on_clean_data(self):
        records = _records(n=2_000, seed=5)
        result = bootstrap_ci(
            records, _moment_pi, BootstrapConfig(n_resamples=400, seed=7)
        )
        assert result.lower <= result.point <= result.upper
        assert result.lower <= 0.25 <= result.upper
        assert result.n_failed == 0

    def test_resampling_is_with_replacement_of_whole_rows(self):
        records = _records(n=120, seed=2)
        by_id = {rid: i for i, rid in enumerate(records.respondent_id)}
        seen = []

        def capture(resample):
            if len(seen) < 5:
                seen.append(resample)
            return 0.0

        bootstrap_ci(records, capture, BootstrapConfig(n_resamples=6, seed=3))
        for resample in seen[1:]:  # seen[0] is the full-data call
            assert len(resample) == len(records)
            rows = [by_id[rid] for rid in resample.respondent_id]
            assert np.array_equal(resample.answer, records.answer[rows])
            assert np.array_equal(resample.subsample, records.subsample[rows])
            assert np.array_equal(
                resample.control_answer, records.control_answer[rows]
            )
            assert np.array_equal(
                resample.time_minutes, records.time_minutes[rows]
            )
            assert len(set(rows)) < len(rows)  # replacement produces ties

    def test_failures_are_recorded_and_excluded(self):
        calls = [0]

        def sometimes_fails(records):
            calls[0] += 1
            if calls[0] > 1 and calls[0] % 20 == 0:
                raise DataError("degenerate resample")
            return _moment_pi(records)

        result = bootstrap_ci(
            _records(), sometimes_fails, BootstrapConfig(n_resamples=200, seed=8)
        )
        assert result.n_failed == 10
        assert result.lower <= result.upper

    def test_too_many_failures_invalidate_the_interval(self):
        calls = [0]

        def often_fails(records):
            calls[0] += 1
            if calls[0] > 1 and calls[0] % 5 == 0:
                raise DataError("degenerate resample")
            return 0.2

        with pytest.raises(NumericalError, match="unreliable"):
            bootstrap_ci(
                _records(), often_fails, BootstrapConfig(n_resamples=200, seed=8)
            )

    def test_non_finite_estimates_count_as_failures(self):
        calls = [0]

        def sometimes_nan(records):
            calls[0] += 1
            return np.nan if calls[0] > 1 and calls[0] % 20 == 0 else 0.2

        result = bootstrap_ci(
            _records(), sometimes_nan, BootstrapConfig(n_resamples=200, seed=8)
        )
        assert result.n_failed == 10

    def test_stratified_resampling_preserves_arm_sizes(self):
        records = _records(n=150, seed=6)
        n_arm1 = int((records.subsample == 1).sum())
        arm_counts = []

        def count_arms(resample):
            arm_counts.append(int((resample.subsample == 1).sum()))
            return 0.0

        bootstrap_ci(
            records,
            count_arms,
            BootstrapConfig(n_resamples=30, seed=4, stratified=True),
        )
        assert all(c == n_arm1 for c in arm_counts)

        arm_counts.clear()
        bootstrap_ci(
            records, count_arms, BootstrapConfig(n_resamples=30, seed=4)
        )
        assert any(c != n_arm1 for c in arm_counts[1:])


class TestBootstrapVector:
    def test_components_share_resamples_with_the_scalar_form(self):
        records = _records(n=400, seed=12)
        config = BootstrapConfig(n_resamples=150, seed=21)

        def both(resample):
            counts = ResponseCounts.from_records(resample)
            fit = moment_onesayers_ra(counts, DESIGN, gamma=0.0)
            return (fit.pi_hat, fit.theta_hat)

        pi_iv, theta_iv = bootstrap_vector(records, both, config)
        scalar_pi = bootstrap_ci(records, _moment_pi, config)
        assert pi_iv == scalar_pi
        assert theta_iv.lower <= theta_iv.upper

    def test_component_failures_are_independent(self):
        calls = [0]

        def second_sometimes_nan(records):
            calls[0] += 1
            bad = calls[0] > 1 and calls[0] % 20 == 0
            return (0.3, np.nan if bad else 0.1)

        first, second = bootstrap_vector(
            _records(),
            second_sometimes_nan,
            BootstrapConfig(n_resamples=200, seed=2),
        )
        assert first.n_failed == 0
        assert second.n_failed == 10


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n_resamples": 0},
            {"n_resamples": -5},
            {"n_resamples": 2.5},
            {"n_resamples": True},
            {"level": 0.0},
            {"level": 1.0},
            {"level": 1.2},
            {"seed": -1},
            {"seed": 2**64},
            {"seed": 1.5},
        ],
    )
    def test_bad_config_is_rejected(self, kwargs):
        with pytest.raises(ParameterError):
            BootstrapConfig(**kwargs)

    def test_defaults_are_valid(self):
        config = BootstrapConfig(seed=123)
        assert config.n_resamples == 10_000
        assert config.level == 0.95
        assert not config.stratified

    def test_out_of_order_interval_is_rejected(self):
        with pytest.raises(ParameterError):
            IntervalEstimate(point=0.2, lower=0.5, upper=0.4, n_failed=0)
