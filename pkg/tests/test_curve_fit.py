from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from embasket.curve_fit import (
    ParametricSpreadCurve,
    Quote,
    eval_parametric,
    fit_sector,
    interpolate_grade_spread,
)
from embasket.errors import DomainError, FitError, MissingParametersError, RatingRangeError

TRUE = {
    "A": (math.log(0.008), math.log(0.004)),
    "BBB": (math.log(0.014), math.log(0.006)),
    "BB": (math.log(0.03), math.log(0.012)),
    "B": (math.log(0.05), math.log(0.02)),
}
THETA = 0.35
TENORS = (1, 2, 3, 5, 7, 10)


def _quotes(params=TRUE, theta=THETA, tenors=TENORS):
    return [Quote(T, float(eval_parametric(*params[b], theta, T)), b) for b in params for T in tenors]


def test_eval_examples():
    a, b = math.log(0.01), math.log(0.02)
    assert eval_parametric(a, b, 0.3, 0.0) == pytest.approx(0.03)
    assert eval_parametric(a, b, 0.3, 5.0) == pytest.approx(0.01 + 0.02 * math.exp(-1.5), abs=1e-15)
    assert eval_parametric(a, b, 0.3, 5.0) == pytest.approx(0.014463, abs=1e-6)
    assert eval_parametric(a, b, 0.3, 1e4) == pytest.approx(0.01)
    with pytest.raises(DomainError):
        eval_parametric(a, b, 0.3, -1.0)


@given(a=st.floats(-7, -2), b=st.floats(-7, -2), theta=st.floats(0.05, 2.0))
def test_eval_decreasing_to_long_end(a, b, theta):
    T = np.linspace(0, 10, 50)
    s = eval_parametric(a, b, theta, T)
    assert np.all(np.diff(s) < 0) and np.all(s > math.exp(a))


def test_round_trip():
    fit = fit_sector(_quotes())
    assert np.max(np.abs(fit.residuals)) <= 1e-6
    assert fit.curve.theta == pytest.approx(THETA, rel=1e-6)
    for k, (a, b) in TRUE.items():
        assert fit.curve.params[k] == pytest.approx((a, b), abs=1e-6)
    assert fit.diagnostics == ()


@settings(max_examples=15, deadline=None)
@given(theta=st.floats(0.1, 1.5), base=st.floats(0.003, 0.02), slope=st.floats(0.2, 3.0))
def test_round_trip_property(theta, base, slope):
    params = {b: (math.log(base * (1.8 ** i)), math.log(base * slope * (1.5 ** i)))
              for i, b in enumerate(("A", "BBB", "BB", "B"))}
    fit = fit_sector(_quotes(params, theta))
    assert np.max(np.abs(fit.residuals)) <= 1e-6


def test_modified_grade_round_trip():
    quotes = _quotes({k: TRUE[k] for k in ("A", "BBB")})
    curve = ParametricSpreadCurve(TRUE, THETA)
    quotes += [Quote(T, 2 / 3 * curve.broad_spread("BBB", T) + 1 / 3 * curve.broad_spread("A", T), "BBB+")
               for T in TENORS]
    fit = fit_sector(quotes)
    assert np.max(np.abs(fit.residuals)) <= 1e-6
    assert fit.curve.params["BBB"] == pytest.approx(TRUE["BBB"], abs=1e-6)


def test_single_rating_reduction():
    fit = fit_sector(_quotes({"BBB": TRUE["BBB"]}))
    assert set(fit.curve.params) == {"BBB"}
    assert np.max(np.abs(fit.residuals)) <= 1e-6


def test_underdetermined_rating_is_excluded():
    quotes = _quotes({k: TRUE[k] for k in ("A", "BBB")}) + [Quote(5.0, 0.04, "B")]
    fit = fit_sector(quotes)
    assert fit.excluded == ("B",)
    assert "B" not in fit.curve.params
    assert any("excluded" in d for d in fit.diagnostics)


def test_unfittable_inputs():
    with pytest.raises(FitError):
        fit_sector([])
    with pytest.raises(FitError):
        fit_sector([Quote(5.0, 0.02, "BBB"), Quote(5.0, 0.05, "B")])
    with pytest.raises(FitError):
        fit_sector(_quotes(tenors=(5.0,)))
    with pytest.raises(FitError):
        fit_sector(_quotes(tenors=(2.0, 5.0)))


def test_quote_validation():
    for kw in (dict(tenor=0.0), dict(tenor=31.0), dict(spread=0.0), dict(spread=0.6)):
        args = dict(tenor=5.0, spread=0.02, grade="BBB") | kw
        with pytest.raises(DomainError):
            Quote(**args)
    with pytest.raises(RatingRangeError):
        Quote(5.0, 0.02, "AA")


def test_ordering_warning():
    swapped = dict(TRUE)
    swapped["A"], swapped["BBB"] = TRUE["BBB"], TRUE["A"]
    with pytest.warns(UserWarning):
        fit = fit_sector(_quotes(swapped))
    assert any("order" in d for d in fit.diagnostics)


def test_interpolation():
    curve = ParametricSpreadCurve(TRUE, THETA)
    T = 4.0
    s = {k: curve.broad_spread(k, T) for k in TRUE}
    assert interpolate_grade_spread(curve, "BBB", T) == s["BBB"]
    assert interpolate_grade_spread(curve, "BBB+", T) == pytest.approx(2 / 3 * s["BBB"] + 1 / 3 * s["A"])
    assert interpolate_grade_spread(curve, "BBB-", T) == pytest.approx(2 / 3 * s["BBB"] + 1 / 3 * s["BB"])
    with pytest.raises(RatingRangeError):
        interpolate_grade_spread(curve, "AA", T)
    with pytest.raises(MissingParametersError):
        interpolate_grade_spread(ParametricSpreadCurve({"A": TRUE["A"]}, THETA), "A-", T)
    notches = [interpolate_grade_spread(curve, g, T)
               for g in ("A", "A-", "BBB+", "BBB", "BBB-", "BB+", "BB", "BB-", "B+", "B")]
    assert np.all(np.diff(notches) > 0)


def test_no_warning_on_ordered_fit():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit_sector(_quotes())
