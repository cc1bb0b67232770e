"""Estimators for the crosswise response laws.

Two routes are implemented side by side and are expected to agree where
the theory says they must:

* closed-form moment estimators that invert the reply laws directly
  (:func:`moment_theta`, :func:`moment_ecwm_ra`,
  :func:`moment_onesayers_ra`), and
* a maximum-likelihood fitter (:func:`fit_mle`) that maximizes the
  arm-conditional multinomial log likelihood numerically.

The likelihood of a count table with cells ``n_ys`` is
``sum_ys n_ys * log P(y|s)``; a weighted fit replaces the integer counts
with per-respondent weight totals, which is algebraically identical to
summing ``w_i * log P(y_i|s_i)`` over respondents.

The optimizer is deliberately derivative free: a coarse scan of the
admissible region seeds either a golden-section search (one free
parameter; every coordinate slice of the log likelihood is concave) or
a Nelder-Mead simplex (two free parameters).  When the closed-form
moment inversion lands strictly inside the parameter box it is used as
the seed instead of the scan, which changes nothing about the optimum
but skips the scan's cost inside resampling loops.  Solutions within
1e-7 of a constraint are flagged as boundary fits.

The objective closures built by :func:`_make_nll_free_theta` and
:func:`_make_nll_fixed_theta` inline the reply laws for speed; a unit
test pins them to the :func:`~crosswise.models.cell_probs` kernel so
the two cannot drift apart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc

from .errors import DataError, ParameterError
from .models import (
    DesignParams,
    ModelKind,
    ModelParams,
    ModelSpec,
    cell_probs,
)
from .records import RecordSet

__all__ = [
    "ResponseCounts",
    "FitResult",
    "moment_theta",
    "moment_ecwm_ra",
    "moment_onesayers_ra",
    "fit_mle",
    "gof_g2",
    "expected_bias",
]

_EDGE_TOL = 1e-7
_XATOL = 1e-9
_GRID_STEP = 0.01
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ResponseCounts:
    """A 2x2 reply table: cells are (reply, arm) totals.

    Cells may be non-integral: expected tables and weighted totals are
    first-class citizens here.  All cells must be finite and
    non-negative.
    """

    diff_s1: float
    same_s1: float
    diff_s2: float
    same_s2: float

    def __post_init__(self) -> None:
        for value in self.as_tuple():
            if not (math.isfinite(value) and value >= 0.0):
                raise DataError(f"count cells must be finite and >= 0, got {value!r}")

    @classmethod
    def from_records(cls, records: RecordSet) -> "ResponseCounts":
        code = (records.subsample.astype(np.intp) - 1) * 2 + (
            records.answer.astype(np.intp) - 1
        )
        cells = np.bincount(code, minlength=4)
        return cls(float(cells[0]), float(cells[1]), float(cells[2]), float(cells[3]))

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.diff_s1, self.same_s1, self.diff_s2, self.same_s2)

    @property
    def n_s1(self) -> float:
        return self.diff_s1 + self.same_s1

    @property
    def n_s2(self) -> float:
        return self.diff_s2 + self.same_s2

    @property
    def n(self) -> float:
        return self.n_s1 + self.n_s2

    def conditional(self) -> tuple[float, float, float, float]:
        """Arm-conditional reply proportions ``(c_1|1, c_2|1, c_1|2, c_2|2)``."""
        n1, n2 = self.n_s1, self.n_s2
        if n1 <= 0.0 or n2 <= 0.0:
            raise DataError("both arms must be non-empty")
        return (self.diff_s1 / n1, self.same_s1 / n1, self.diff_s2 / n2, self.same_s2 / n2)


@dataclass(frozen=True)
class FitResult:
    """Outcome of a moment or likelihood fit.

    ``gamma_fixed`` echoes the fixed random-answering share (0 for laws
    without one).  ``clipped`` records that a closed-form estimate was
    pulled back into its admissible range, ``boundary`` that a
    likelihood optimum sits on a constraint, and ``degenerate`` that the
    estimator was undefined at the observed table (the estimates are
    then NaN).
    """

    spec: ModelSpec
    method: str
    pi_hat: float
    theta_hat: float | None
    gamma_fixed: float
    loglik: float
    g2: float
    df: int
    p_value: float
    clipped: bool = False
    boundary: bool = False
    degenerate: bool = False


# ---------------------------------------------------------------------------
# moment estimators
# ---------------------------------------------------------------------------


def moment_theta(counts: ResponseCounts) -> float:
    """Closed-form one-saying prevalence: the DIFFERENT proportions of
    the two arms sum to ``1 + theta`` under the one-sayer laws.

    Returns the raw plug-in value, which sampling noise can push
    outside ``[0, 1]``; callers decide whether to clip.
    """
    c_d1, _, c_d2, _ = counts.conditional()
    return c_d1 + c_d2 - 1.0


def moment_ecwm_ra(
    counts: ResponseCounts, design: DesignParams, gamma: float = 0.0
) -> FitResult:
    """Closed-form prevalence under honest answering plus a fixed
    random-answering share.

    Inverts the law through the unconditional DIFFERENT-in-arm-1 and
    SAME-in-arm-2 proportions (cell counts over the total sample size),
    so the two arms are pooled with their observed sizes.  ``gamma = 1``
    leaves nothing to invert and is rejected.
    """
    if not 0.0 <= gamma < 1.0:
        raise ParameterError(f"gamma must lie in [0, 1) for this inversion, got {gamma!r}")
    if counts.n_s1 <= 0.0 or counts.n_s2 <= 0.0:
        raise DataError("both arms must be non-empty")
    n = counts.n
    u_d1 = counts.diff_s1 / n
    u_s2 = counts.same_s2 / n
    p, q = design.p, design.q
    raw = (u_d1 + u_s2 - (1.0 - gamma) * q - 0.5 * gamma) / ((p - q) * (1.0 - gamma))
    pi_hat = min(1.0, max(0.0, raw))
    spec = ModelSpec.ecwm_ra(gamma)
    w = counts.as_tuple()
    g2, df, p_value = _gof_from_params(spec.kind, w, design, pi_hat, 0.0, gamma)
    return FitResult(
        spec=spec,
        method="moment",
        pi_hat=pi_hat,
        theta_hat=None,
        gamma_fixed=gamma,
        loglik=_loglik(spec.kind, w, design, pi_hat, 0.0, gamma),
        g2=g2,
        df=df,
        p_value=p_value,
        clipped=(pi_hat != raw),
    )


def moment_onesayers_ra(
    counts: ResponseCounts, design: DesignParams, gamma: float = 0.0
) -> FitResult:
    """Closed-form prevalence and one-saying share under the one-sayer
    law with a fixed random-answering share.

    Uses the arm-conditional SAME proportions.  When their sum equals
    ``gamma`` the inversion divides by zero; the result is then returned
    with NaN estimates and the ``degenerate`` flag set rather than
    raising, since resampled tables can hit this without being user
    errors.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ParameterError(f"gamma must lie in [0, 1], got {gamma!r}")
    _, c_s1, _, c_s2 = counts.conditional()
    p, q = design.p, design.q
    spec = ModelSpec.one_sayers_ra(gamma)
    theta_raw = moment_theta(counts)
    denom_core = c_s1 + c_s2 - gamma
    if abs(denom_core) < 1e-12:
        nan = float("nan")
        return FitResult(
            spec=spec,
            method="moment",
            pi_hat=nan,
            theta_hat=nan,
            gamma_fixed=gamma,
            loglik=nan,
            g2=nan,
            df=spec.kind.residual_df,
            p_value=nan,
            degenerate=True,
        )
    pi_raw = (p * c_s2 - q * c_s1 - gamma * (p - 0.5)) / ((p - q) * denom_core)
    pi_hat = min(1.0, max(0.0, pi_raw))
    theta_hat = min(1.0 - gamma, max(0.0, theta_raw))
    w = counts.as_tuple()
    g2, df, p_value = _gof_from_params(spec.kind, w, design, pi_hat, theta_hat, gamma)
    return FitResult(
        spec=spec,
        method="moment",
        pi_hat=pi_hat,
        theta_hat=theta_hat,
        gamma_fixed=gamma,
        loglik=_loglik(spec.kind, w, design, pi_hat, theta_hat, gamma),
        g2=g2,
        df=df,
        p_value=p_value,
        clipped=(pi_hat != pi_raw or theta_hat != theta_raw),
    )


# ---------------------------------------------------------------------------
# likelihood machinery
# ---------------------------------------------------------------------------


def _loglik(kind, w, design, pi, theta, gamma) -> float:
    """Reference log likelihood straight off the cell_probs kernel."""
    probs = cell_probs(kind, pi, theta, gamma, design.p, design.q)
    if kind is ModelKind.CWM:
        w = (w[0], w[1], 0.0, 0.0)
    ll = 0.0
    for wi, pr in zip(w, probs):
        if wi != 0.0:
            if pr <= 0.0:
                return -math.inf
            ll += wi * math.log(pr)
    return ll


def _make_nll_free_theta(w, p, q, gamma):
    """Negative log likelihood over (pi, theta) for the one-sayer laws.

    Exploits ``P(diff, honest | arm 2) = 1 - P(diff, honest | arm 1)``
    to touch the design rates once per evaluation.  Out-of-box points
    evaluate to +inf.
    """
    w1, w2, w3, w4 = w
    half_g = 0.5 * gamma
    theta_cap = 1.0 - gamma
    span = p - q
    log = math.log
    inf = math.inf

    def nll(pi: float, theta: float) -> float:
        if pi < 0.0 or pi > 1.0 or theta < 0.0 or theta > theta_cap:
            return inf
        honest = theta_cap - theta
        a = honest * (q + span * pi)
        d1 = a + theta + half_g
        s1 = honest - a + half_g
        d2 = honest - a + theta + half_g
        s2 = a + half_g
        if d1 <= 0.0 or s1 <= 0.0 or d2 <= 0.0 or s2 <= 0.0:
            if (w1 and d1 <= 0.0) or (w2 and s1 <= 0.0) or (w3 and d2 <= 0.0) or (
                w4 and s2 <= 0.0
            ):
                return inf
        ll = 0.0
        if w1 != 0.0:
            ll += w1 * log(d1)
        if w2 != 0.0:
            ll += w2 * log(s1)
        if w3 != 0.0:
            ll += w3 * log(d2)
        if w4 != 0.0:
            ll += w4 * log(s2)
        return -ll

    return nll


def _make_nll_fixed_theta(kind, w, p, q, gamma):
    """Negative log likelihood over pi for the symmetric laws.

    The ECWM-family laws satisfy ``P(1|1) = P(2|2)`` and
    ``P(2|1) = P(1|2)``, so the four cells collapse to two pooled
    totals.  For the single-arm CWM the arm-2 cells were zeroed by the
    caller and the same expression applies with the plain design rates.
    """
    if kind is ModelKind.CWM or kind is ModelKind.ECWM:
        pe, qe = p, q
    else:
        half_g = 0.5 * gamma
        pe = (1.0 - gamma) * p + half_g
        qe = (1.0 - gamma) * q + half_g
    w_diag = w[0] + w[3]
    w_off = w[1] + w[2]
    span = pe - qe
    log = math.log
    inf = math.inf

    def nll(pi: float) -> float:
        if pi < 0.0 or pi > 1.0:
            return inf
        d1 = qe + span * pi
        s1 = 1.0 - d1
        ll = 0.0
        if w_diag != 0.0:
            if d1 <= 0.0:
                return inf
            ll += w_diag * log(d1)
        if w_off != 0.0:
            if s1 <= 0.0:
                return inf
            ll += w_off * log(s1)
        return -ll

    return nll


def _golden_min(f, lo: float, hi: float, tol: float = _XATOL) -> float:
    """Golden-section minimum of a unimodal function on [lo, hi]."""
    h = hi - lo
    if h <= tol:
        return 0.5 * (lo + hi)
    c = hi - _INVPHI * h
    d = lo + _INVPHI * h
    fc, fd = f(c), f(d)
    while h > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            h = hi - lo
            c = hi - _INVPHI * h
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            h = hi - lo
            d = lo + _INVPHI * h
            fd = f(d)
    return 0.5 * (lo + hi)


def _nelder_mead(f, x0: float, y0: float, step: float, xatol: float = _XATOL,
                 max_iter: int = 600):
    """Minimize ``f(x, y)`` with a plain Nelder-Mead simplex.

    Infeasible points must evaluate to +inf; the simplex then contracts
    back into the feasible region on its own.  Termination is on simplex
    size, the quantity the package's accuracy contract is stated in.
    The three vertices are juggled as scalars: this routine sits inside
    resampling loops and allocation churn is measurable there.
    """
    ax, ay = x0, y0
    bx, by = x0 + (step if x0 + step <= 1.0 else -step), y0
    up_ok = math.isfinite(f(x0, y0 + step)) or y0 - step < 0.0
    cx, cy = x0, y0 + (step if up_ok else -step)
    fa, fb, fc = f(ax, ay), f(bx, by), f(cx, cy)
    for _ in range(max_iter):
        # order so (ax, ay) is best and (cx, cy) worst
        if fa > fb:
            ax, ay, fa, bx, by, fb = bx, by, fb, ax, ay, fa
        if fb > fc:
            bx, by, fb, cx, cy, fc = cx, cy, fc, bx, by, fb
            if fa > fb:
                ax, ay, fa, bx, by, fb = bx, by, fb, ax, ay, fa
        if (
            abs(bx - ax) < xatol
            and abs(by - ay) < xatol
            and abs(cx - ax) < xatol
            and abs(cy - ay) < xatol
        ):
            break
        mx, my = 0.5 * (ax + bx), 0.5 * (ay + by)
        rx, ry = mx + mx - cx, my + my - cy
        fr = f(rx, ry)
        if fr < fa:
            ex, ey = mx + 2.0 * (mx - cx), my + 2.0 * (my - cy)
            fe = f(ex, ey)
            if fe < fr:
                cx, cy, fc = ex, ey, fe
            else:
                cx, cy, fc = rx, ry, fr
        elif fr < fb:
            cx, cy, fc = rx, ry, fr
        else:
            if fr < fc:
                kx, ky = mx + 0.5 * (rx - mx), my + 0.5 * (ry - my)
            else:
                kx, ky = mx - 0.5 * (mx - cx), my - 0.5 * (my - cy)
            fk = f(kx, ky)
            if fk < fr and fk < fc:
                cx, cy, fc = kx, ky, fk
            else:
                bx, by = 0.5 * (ax + bx), 0.5 * (ay + by)
                cx, cy = 0.5 * (ax + cx), 0.5 * (ay + cy)
                fb, fc = f(bx, by), f(cx, cy)
    if fb < fa:
        ax, ay, fa = bx, by, fb
    if fc < fa:
        ax, ay, fa = cx, cy, fc
    return ax, ay, fa


def _grid_axis(lo: float, hi: float, step: float) -> list[float]:
    n = max(1, int(round((hi - lo) / step)))
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def _moment_seed(w, design, gamma, theta_cap):
    """Interior moment inversion to seed the simplex, or None."""
    n1 = w[0] + w[1]
    n2 = w[2] + w[3]
    if n1 <= 0.0 or n2 <= 0.0:
        return None
    c_s1, c_s2 = w[1] / n1, w[3] / n2
    c_d1, c_d2 = w[0] / n1, w[2] / n2
    denom_core = c_s1 + c_s2 - gamma
    if abs(denom_core) < 1e-9:
        return None
    p, q = design.p, design.q
    pi = (p * c_s2 - q * c_s1 - gamma * (p - 0.5)) / ((p - q) * denom_core)
    theta = c_d1 + c_d2 - 1.0
    if not (1e-6 < pi < 1.0 - 1e-6 and 1e-6 < theta < theta_cap - 1e-6):
        return None
    return pi, theta


def _fit_single_free(kind, w, design, gamma):
    """Grid-seeded golden-section fit of the laws with one free parameter."""
    nll = _make_nll_fixed_theta(kind, w, design.p, design.q, gamma)
    best = min(_grid_axis(0.0, 1.0, _GRID_STEP), key=nll)
    lo = max(0.0, best - _GRID_STEP)
    hi = min(1.0, best + _GRID_STEP)
    pi = _golden_min(nll, lo, hi)
    boundary = pi < _EDGE_TOL or pi > 1.0 - _EDGE_TOL
    return pi, None, -nll(pi), boundary


def _fit_two_free(kind, w, design, gamma):
    """Seeded Nelder-Mead fit of the one-sayer laws, with an edge sweep
    whenever the optimum may sit on a constraint."""
    theta_cap = 1.0 - gamma
    nll = _make_nll_free_theta(w, design.p, design.q, gamma)
    if theta_cap < _XATOL:
        # no honest mass left: the law is flat in pi, fit is degenerate
        pi = _golden_min(lambda x: nll(x, 0.0), 0.0, 1.0)
        return pi, 0.0, -nll(pi, 0.0), True
    seed = _moment_seed(w, design, gamma, theta_cap)
    if seed is None:
        candidates = (
            (x, y)
            for x in _grid_axis(0.0, 1.0, _GRID_STEP)
            for y in _grid_axis(0.0, theta_cap, _GRID_STEP)
        )
        sx, sy = min(candidates, key=lambda c: nll(c[0], c[1]))
        step = 2.0 * _GRID_STEP
        from_scan = True
    else:
        sx, sy = seed
        step = _GRID_STEP
        from_scan = False
    pi, theta, fmin = _nelder_mead(nll, sx, min(sy, theta_cap), step)

    near_edge = (
        from_scan
        or pi < 1e-5
        or pi > 1.0 - 1e-5
        or theta < 1e-5
        or theta > theta_cap - 1e-5
    )
    if near_edge:
        # Coordinate slices of the log likelihood are concave, so each
        # edge restriction is solved exactly by golden section.
        edge_fits = (
            (_golden_min(lambda x: nll(x, 0.0), 0.0, 1.0), 0.0),
            (_golden_min(lambda x: nll(x, theta_cap), 0.0, 1.0), theta_cap),
            (0.0, _golden_min(lambda y: nll(0.0, y), 0.0, theta_cap)),
            (1.0, _golden_min(lambda y: nll(1.0, y), 0.0, theta_cap)),
        )
        for ex, ey in edge_fits:
            fe = nll(ex, ey)
            if fe < fmin:
                pi, theta, fmin = ex, ey, fe
    boundary = (
        pi < _EDGE_TOL
        or pi > 1.0 - _EDGE_TOL
        or theta < _EDGE_TOL
        or theta > theta_cap - _EDGE_TOL
    )
    return pi, theta, -fmin, boundary


def fit_mle(
    spec: ModelSpec,
    counts: ResponseCounts | None,
    design: DesignParams,
    *,
    records: RecordSet | None = None,
    weights=None,
) -> FitResult:
    """Maximum-likelihood fit of a response law.

    Parameters
    ----------
    spec, design
        The law to fit and the randomization design.
    counts
        Reply table for an unweighted fit.  May be None when ``records``
        is given, in which case the table is derived from the records.
    records, weights
        A weighted fit takes the respondent list plus one weight in
        ``[0, 1]`` per respondent and maximizes the weighted log
        likelihood; ``counts`` must then be None, since the weighted
        cell totals replace it.

    The reported deviance ``g2`` compares the fit against the saturated
    per-arm reply proportions (weighted totals for weighted fits) and
    carries a chi-square p-value on the law's residual degrees of
    freedom; a saturated law reports p = 1 at deviance 0.
    """
    if weights is not None:
        if records is None:
            raise ParameterError("a weighted fit requires the respondent records")
        if counts is not None:
            raise ParameterError("pass either counts or records+weights, not both")
        wvec = np.asarray(weights, dtype=np.float64)
        if wvec.shape != (len(records),):
            raise DataError("weights length does not match the records")
        if not np.isfinite(wvec).all() or (wvec < 0.0).any() or (wvec > 1.0).any():
            raise DataError("weights must be finite and lie in [0, 1]")
        code = (records.subsample.astype(np.intp) - 1) * 2 + (
            records.answer.astype(np.intp) - 1
        )
        cells = np.bincount(code, weights=wvec, minlength=4)
        table = ResponseCounts(*(float(c) for c in cells))
        method = "mle_weighted"
    else:
        if counts is None:
            if records is None:
                raise ParameterError("fit_mle needs counts or records")
            counts = ResponseCounts.from_records(records)
        table = counts
        method = "mle"

    kind = spec.kind
    w = table.as_tuple()
    if kind is ModelKind.CWM:
        w = (w[0], w[1], 0.0, 0.0)
        if w[0] + w[1] <= 0.0:
            raise DataError("arm 1 is empty")
    elif table.n_s1 <= 0.0 or table.n_s2 <= 0.0:
        raise DataError("both arms must be non-empty")

    gamma = spec.gamma
    if kind.has_theta:
        pi, theta, loglik, boundary = _fit_two_free(kind, w, design, gamma)
    else:
        pi, theta, loglik, boundary = _fit_single_free(kind, w, design, gamma)

    g2, df, p_value = _gof_from_params(kind, w, design, pi, theta or 0.0, gamma)
    return FitResult(
        spec=spec,
        method=method,
        pi_hat=pi,
        theta_hat=theta,
        gamma_fixed=gamma,
        loglik=loglik,
        g2=g2,
        df=df,
        p_value=p_value,
        boundary=boundary,
    )


# ---------------------------------------------------------------------------
# goodness of fit and bias
# ---------------------------------------------------------------------------


def _gof_from_params(kind, w, design, pi, theta, gamma):
    probs = cell_probs(kind, pi, theta, gamma, design.p, design.q)
    arms = ((w[0], w[1], probs[0], probs[1]),) if kind is ModelKind.CWM else (
        (w[0], w[1], probs[0], probs[1]),
        (w[2], w[3], probs[2], probs[3]),
    )
    g2 = 0.0
    for wd, ws, pd, ps in arms:
        total = wd + ws
        if total <= 0.0:
            continue
        for cell, fitted in ((wd, pd), (ws, ps)):
            if cell == 0.0:
                continue
            if fitted <= 0.0:
                g2 = math.inf
                break
            g2 += 2.0 * cell * math.log(cell / total / fitted)
        if math.isinf(g2):
            break
    if not math.isinf(g2):
        g2 = max(0.0, g2)
    df = kind.residual_df
    if df == 0:
        p_value = 1.0 if g2 <= 1e-9 else 0.0
    elif math.isinf(g2):
        p_value = 0.0
    else:
        p_value = float(gammaincc(df / 2.0, g2 / 2.0))
    return g2, df, p_value


def gof_g2(
    spec: ModelSpec,
    counts: ResponseCounts,
    design: DesignParams,
    fit: FitResult,
) -> tuple[float, int, float]:
    """Deviance of ``fit`` against the saturated reply proportions.

    Observed-zero cells contribute nothing; a fitted-zero probability
    against a positive count yields an infinite deviance with p = 0.
    The chi-square tail uses the regularized upper incomplete gamma;
    with zero residual degrees of freedom the p-value is 1 exactly when
    the deviance vanishes.
    """
    theta = fit.theta_hat if fit.theta_hat is not None else 0.0
    return _gof_from_params(
        spec.kind, counts.as_tuple(), design, fit.pi_hat, theta, fit.gamma_fixed
    )


def expected_bias(pi: float, theta: float, gamma: float) -> tuple[float, float]:
    """Large-sample value and bias of the honest-law prevalence estimate
    when one-sayers and random answerers are present.

    The estimate is pulled toward 0.5: its expectation is
    ``pi + (theta + gamma) * (0.5 - pi)``.  Returns ``(expected, bias)``.
    """
    ModelParams(pi=pi, theta=theta, gamma=gamma)
    bias = (theta + gamma) * (0.5 - pi)
    return pi + bias, bias
