"""Moment and likelihood fits: closed-form oracles, dual-route
agreement, boundary handling, and the deviance test."""

import math

import numpy as np
import pytest

from crosswise import (
    DataError,
    DesignParams,
    ModelKind,
    ModelParams,
    ModelSpec,
    ParameterError,
    RecordSet,
    ResponseCounts,
    expected_bias,
    fit_mle,
    gof_g2,
    moment_ecwm_ra,
    moment_onesayers_ra,
    moment_theta,
    response_probs,
)
from crosswise.estimation import (
    _loglik,
    _make_nll_fixed_theta,
    _make_nll_free_theta,
)
from crosswise.models import cell_probs

DESIGN = DesignParams(0.8)

# exact tables: the hand-checked laws scaled to n = 1000, split 500/500
ONE_SAYER_TABLE = ResponseCounts(415.0, 585.0, 685.0, 315.0)
ONE_SAYER_RA_TABLE = ResponseCounts(445.0, 555.0, 655.0, 345.0)
ECWM_TABLE = ResponseCounts(175.0, 325.0, 325.0, 175.0)


def exact_table(kind, pi, theta, gamma, design, scale=1000.0):
    d1, s1, d2, s2 = cell_probs(kind, pi, theta, gamma, design.p, design.q)
    half = scale / 2.0
    return ResponseCounts(d1 * half, s1 * half, d2 * half, s2 * half)


# -- closed-form estimators ----------------------------------------------


def test_one_saying_share_from_diff_proportions():
    assert moment_theta(ONE_SAYER_TABLE) == pytest.approx(0.1, abs=1e-12)
    assert moment_theta(ONE_SAYER_RA_TABLE) == pytest.approx(0.1, abs=1e-12)
    # the raw statistic may be negative; it is not clipped here
    assert moment_theta(ResponseCounts(100.0, 900.0, 700.0, 300.0)) < 0.0


def test_moment_inversion_one_sayer_family():
    fit = moment_onesayers_ra(ONE_SAYER_RA_TABLE, DESIGN, gamma=0.2)
    assert fit.method == "moment"
    assert fit.pi_hat == pytest.approx(0.25, abs=1e-12)
    assert fit.theta_hat == pytest.approx(0.1, abs=1e-12)
    assert fit.g2 == pytest.approx(0.0, abs=1e-9)
    assert fit.df == 0
    assert fit.p_value == 1.0
    assert not (fit.clipped or fit.degenerate)


def test_moment_inversion_honest_family():
    fit = moment_ecwm_ra(ECWM_TABLE, DESIGN, gamma=0.0)
    assert fit.pi_hat == pytest.approx(0.25, abs=1e-12)
    assert fit.theta_hat is None
    assert fit.df == 1


def test_moment_clips_out_of_range_prevalence():
    fit = moment_ecwm_ra(ResponseCounts(100.0, 900.0, 900.0, 100.0), DESIGN)
    assert fit.pi_hat == 0.0
    assert fit.clipped


def test_moment_degenerates_at_the_share_pole():
    # SAME proportions sum exactly to the fixed share: the inversion has
    # no answer, and says so instead of raising
    fit = moment_onesayers_ra(
        ResponseCounts(500.0, 500.0, 700.0, 300.0), DESIGN, gamma=0.8
    )
    assert fit.degenerate
    assert math.isnan(fit.pi_hat)


# -- likelihood fits on exact tables -------------------------------------


def test_mle_recovers_the_ecwm_table():
    fit = fit_mle(ModelSpec.ecwm(), ECWM_TABLE, DESIGN)
    assert fit.method == "mle"
    assert fit.pi_hat == pytest.approx(0.25, abs=1e-7)
    assert fit.g2 == pytest.approx(0.0, abs=1e-9)
    assert fit.df == 1
    assert fit.p_value == pytest.approx(1.0, abs=1e-6)


def test_symmetric_table_fits_the_ecwm_exactly():
    fit = fit_mle(ModelSpec.ecwm(), ResponseCounts(170.0, 330.0, 330.0, 170.0), DESIGN)
    assert fit.pi_hat == pytest.approx((0.34 - 0.2) / 0.6, abs=1e-6)
    assert fit.g2 == pytest.approx(0.0, abs=1e-9)
    assert fit.df == 1


def test_mle_recovers_the_one_sayer_table():
    fit = fit_mle(ModelSpec.one_sayers(), ONE_SAYER_TABLE, DESIGN)
    assert fit.pi_hat == pytest.approx(0.25, abs=1e-7)
    assert fit.theta_hat == pytest.approx(0.1, abs=1e-7)
    assert fit.g2 == pytest.approx(0.0, abs=1e-9)
    assert fit.df == 0
    assert fit.p_value == 1.0


def test_mle_recovers_the_one_sayer_random_table():
    fit = fit_mle(ModelSpec.one_sayers_ra(0.2), ONE_SAYER_RA_TABLE, DESIGN)
    assert fit.pi_hat == pytest.approx(0.25, abs=1e-7)
    assert fit.theta_hat == pytest.approx(0.1, abs=1e-7)
    assert fit.gamma_fixed == 0.2


def test_cwm_fits_on_a_single_arm():
    fit = fit_mle(ModelSpec.cwm(), ResponseCounts(350.0, 650.0, 0.0, 0.0), DESIGN)
    assert fit.pi_hat == pytest.approx(0.25, abs=1e-7)
    assert fit.df == 0


def test_two_arm_laws_need_both_arms():
    with pytest.raises(DataError):
        fit_mle(ModelSpec.ecwm(), ResponseCounts(350.0, 650.0, 0.0, 0.0), DESIGN)


def test_loglik_matches_the_law_it_reports():
    counts = ResponseCounts(430.0, 570.0, 610.0, 390.0)
    fit = fit_mle(ModelSpec.one_sayers(), counts, DESIGN)
    probs = response_probs(
        ModelSpec.one_sayers(),
        ModelParams(pi=fit.pi_hat, theta=fit.theta_hat),
        DESIGN,
    )
    by_hand = sum(
        w * math.log(pr) for w, pr in zip(counts.as_tuple(), probs.as_tuple())
    )
    assert fit.loglik == pytest.approx(by_hand, abs=1e-9)


def test_misfitting_table_yields_positive_deviance():
    counts = ResponseCounts(300.0, 700.0, 450.0, 550.0)
    fit = fit_mle(ModelSpec.ecwm(), counts, DESIGN)
    assert fit.g2 > 1.0
    assert 0.0 <= fit.p_value < 1.0
    g2, df, p = gof_g2(ModelSpec.ecwm(), counts, DESIGN, fit)
    assert g2 == pytest.approx(fit.g2, abs=1e-12)
    assert (df, p) == (fit.df, fit.p_value)


# -- dual-route agreement ------------------------------------------------


def test_moment_and_mle_agree_on_random_interior_tables():
    rng = np.random.default_rng(2203)
    checked = 0
    while checked < 40:
        cells = rng.integers(50, 500, size=4).astype(float)
        gamma = float(rng.uniform(0.0, 0.4))
        mom = moment_onesayers_ra(ResponseCounts(*cells), DESIGN, gamma=gamma)
        interior = (
            not (mom.clipped or mom.degenerate)
            and 1e-3 < mom.pi_hat < 1.0 - 1e-3
            and 1e-3 < mom.theta_hat < 1.0 - gamma - 1e-3
        )
        if not interior:
            continue
        mle = fit_mle(ModelSpec.one_sayers_ra(gamma), ResponseCounts(*cells), DESIGN)
        assert mle.pi_hat == pytest.approx(mom.pi_hat, abs=1e-6)
        assert mle.theta_hat == pytest.approx(mom.theta_hat, abs=1e-6)
        checked += 1


def test_noiseless_round_trip_on_random_parameters():
    rng = np.random.default_rng(2204)
    for _ in range(40):
        p = float(rng.uniform(0.55, 0.95))
        design = DesignParams(p)
        pi = float(rng.uniform(0.05, 0.95))
        gamma = float(rng.uniform(0.0, 0.5))
        theta = float(rng.uniform(0.01, 0.95 - gamma))
        table = exact_table(ModelKind.ONE_SAYERS_RA, pi, theta, gamma, design)
        mom = moment_onesayers_ra(table, design, gamma=gamma)
        assert mom.pi_hat == pytest.approx(pi, abs=1e-12)
        assert mom.theta_hat == pytest.approx(theta, abs=1e-12)


def test_optimizer_objectives_match_the_reference_law():
    rng = np.random.default_rng(2205)
    for _ in range(150):
        w = tuple(float(x) for x in rng.uniform(1.0, 400.0, size=4))
        p = float(rng.uniform(0.55, 0.95))
        design = DesignParams(p)
        gamma = float(rng.uniform(0.0, 0.6))
        pi = float(rng.uniform(0.0, 1.0))
        theta = float(rng.uniform(0.0, 1.0 - gamma))
        free = _make_nll_free_theta(w, p, design.q, gamma)
        ref = -_loglik(ModelKind.ONE_SAYERS_RA, w, design, pi, theta, gamma)
        assert free(pi, theta) == pytest.approx(ref, rel=1e-10, abs=1e-9)
        fixed = _make_nll_fixed_theta(ModelKind.ECWM_RA, w, p, design.q, gamma)
        ref = -_loglik(ModelKind.ECWM_RA, w, design, pi, 0.0, gamma)
        assert fixed(pi) == pytest.approx(ref, rel=1e-10, abs=1e-9)


# -- weighted fits -------------------------------------------------------


def _records_for_table(d1, s1, d2, s2):
    answer = [1] * d1 + [2] * s1 + [1] * d2 + [2] * s2
    subsample = [1] * (d1 + s1) + [2] * (d2 + s2)
    return RecordSet(answer=answer, subsample=subsample)


def test_unit_weights_match_the_unweighted_fit():
    records = _records_for_table(43, 57, 61, 39)
    plain = fit_mle(ModelSpec.one_sayers(), ResponseCounts.from_records(records), DESIGN)
    weighted = fit_mle(
        ModelSpec.one_sayers(),
        None,
        DESIGN,
        records=records,
        weights=np.ones(len(records)),
    )
    assert weighted.pi_hat == pytest.approx(plain.pi_hat, abs=1e-9)
    assert weighted.theta_hat == pytest.approx(plain.theta_hat, abs=1e-9)


def test_constant_weights_leave_the_estimate_unchanged():
    records = _records_for_table(43, 57, 61, 39)
    full = fit_mle(
        ModelSpec.ecwm(), None, DESIGN, records=records, weights=np.ones(len(records))
    )
    halved = fit_mle(
        ModelSpec.ecwm(),
        None,
        DESIGN,
        records=records,
        weights=np.full(len(records), 0.5),
    )
    assert halved.pi_hat == pytest.approx(full.pi_hat, abs=1e-8)


def test_zero_weight_rows_drop_out():
    records = _records_for_table(40, 60, 60, 40)
    weights = np.ones(len(records))
    # silence ten DIFFERENT answers in arm 1 -> table (30, 60, 60, 40)
    weights[:10] = 0.0
    weighted = fit_mle(
        ModelSpec.one_sayers(), None, DESIGN, records=records, weights=weights
    )
    plain = fit_mle(
        ModelSpec.one_sayers(), ResponseCounts(30.0, 60.0, 60.0, 40.0), DESIGN
    )
    assert weighted.pi_hat == pytest.approx(plain.pi_hat, abs=1e-9)


def test_weighted_fit_rejects_bad_input():
    records = _records_for_table(10, 10, 10, 10)
    with pytest.raises(ParameterError):
        fit_mle(
            ModelSpec.ecwm(),
            ResponseCounts.from_records(records),
            DESIGN,
            records=records,
            weights=np.ones(len(records)),
        )
    with pytest.raises(DataError):
        fit_mle(ModelSpec.ecwm(), None, DESIGN, records=records, weights=[0.5] * 3)
    with pytest.raises(DataError):
        fit_mle(
            ModelSpec.ecwm(),
            None,
            DESIGN,
            records=records,
            weights=np.full(len(records), 1.5),
        )


# -- uncorrected-estimator bias surface ----------------------------------


def test_bias_surface_hand_values():
    assert expected_bias(0.25, 0.0, 0.25) == pytest.approx((0.3125, 0.0625))
    assert expected_bias(0.25, 0.1, 0.25) == pytest.approx((0.3375, 0.0875))
    assert expected_bias(0.5, 0.3, 0.2) == pytest.approx((0.5, 0.0))
    expected, bias = expected_bias(0.25, 0.0, 1.0)
    assert (expected, bias) == pytest.approx((0.5, 0.25))


def test_bias_surface_validates_parameters():
    with pytest.raises(ParameterError):
        expected_bias(0.25, 0.7, 0.5)
    with pytest.raises(ParameterError):
        expected_bias(1.2, 0.0, 0.0)


def test_bias_matches_plugging_the_law_into_the_honest_estimator():
    rng = np.random.default_rng(2206)
    for _ in range(60):
        gamma = float(rng.uniform(0.0, 0.8))
        theta = float(rng.uniform(0.0, 1.0 - gamma))
        pi = float(rng.uniform(0.0, 1.0))
        p = float(rng.uniform(0.55, 0.95))
        design = DesignParams(p)
        table = exact_table(ModelKind.ONE_SAYERS_RA, pi, theta, gamma, design)
        naive = moment_ecwm_ra(table, design, gamma=0.0)
        expected, _ = expected_bias(pi, theta, gamma)
        assert naive.pi_hat == pytest.approx(expected, abs=1e-12)
