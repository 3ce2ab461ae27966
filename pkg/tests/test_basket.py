from __future__ import annotations

import math

import numpy as np
import pytest

from embasket.basket import (
    BasketOptions,
    BasketSpec,
    basket_default_samples,
    em_corporate_curve,
    simulate_for_spec,
)
from embasket.errors import DomainError, MissingBarrierError, MissingParametersError
from embasket.process import PathConfig, ProcessParams, simulate_pair_crossings

COUNTRY = ProcessParams(0.32, 0.5, 0.25)
SECTOR = {
    "A": ProcessParams(0.18, 0.125, 0.27),
    "BBB": ProcessParams(0.16, 0.25, 0.27),
    "BB": ProcessParams(0.16, 0.5, 0.27),
    "B": ProcessParams(0.15, 1.0, 0.27),
}
TENORS = [0.5, 1, 2, 5, 10]
CFG = PathConfig(horizon=10, dt=0.02, n_paths=4000, seed=5)


@pytest.fixture(scope="module")
def joint():
    return simulate_pair_crossings(SECTOR["BB"], COUNTRY, 0.8, [0.85, 1.0, 1.2], [1.0, 1.2, 1.45], CFG)


def test_sentinel_is_standalone(joint):
    tau = basket_default_samples(joint, BasketSpec(lstar_c=math.inf))
    np.testing.assert_array_equal(tau, joint.corporate.times_for(1.0))


def test_plain_ftd_is_minimum(joint):
    tau = basket_default_samples(joint, BasketSpec.plain_ftd())
    np.testing.assert_array_equal(tau, np.minimum(joint.corporate.times_for(1.0), joint.country.times_for(1.0)))


def test_deeper_country_barrier_delays_default(joint):
    a = basket_default_samples(joint, BasketSpec(lstar_c=1.2))
    b = basket_default_samples(joint, BasketSpec(lstar_c=1.45))
    assert np.all(b >= a)
    tau_a = joint.corporate.times_for(1.0)
    assert np.all(a <= tau_a) and np.all(a <= joint.country.times_for(1.2))


def test_extension1_and_quasi_sovereign(joint):
    ext = basket_default_samples(joint, BasketSpec(lstar_c=1.2, lstar_a=0.85))
    assert np.all(ext <= basket_default_samples(joint, BasketSpec(lstar_c=1.2)))
    qs = basket_default_samples(joint, BasketSpec(lstar_c=1.0, lstar_a=1.2))
    assert np.all(qs <= joint.country.times_for(1.0))


def test_missing_barrier_and_rho_mismatch(joint):
    with pytest.raises(MissingBarrierError):
        basket_default_samples(joint, BasketSpec(lstar_c=1.35))
    with pytest.raises(DomainError):
        basket_default_samples(joint, BasketSpec(lstar_c=1.2, rho=0.5))
    with pytest.raises(DomainError):
        BasketSpec(lstar_c=0.0)


def test_options_pick_barriers():
    from embasket.ratings import RatingSchemes

    s = RatingSchemes()
    assert BasketOptions().spec_for("BBB", s, 0.8) == BasketSpec(1.35, 1.0, 0.8)
    ext = BasketOptions(extension1=True, extension1_grades=("BB", "B"))
    assert ext.spec_for("BB-", s, 0.8).lstar_a == 0.85
    assert ext.spec_for("BBB", s, 0.8).lstar_a == 1.0
    qs = BasketOptions(quasi_sovereign=True, lstar_a=1.3)
    assert qs.spec_for("A", s, 0.8) == BasketSpec(1.0, 1.3, 0.8)


@pytest.fixture(scope="module")
def curves():
    return em_corporate_curve(COUNTRY, SECTOR, cfg=CFG, tenors=TENORS, country_grade="BB")


def test_curve_families_are_ordered(curves):
    for g in curves.grades:
        sa = curves.spreads("standalone", g)
        em = curves.spreads("em", g)
        ftd = curves.spreads("ftd", g)
        assert np.all(sa <= em) and np.all(em <= ftd)
        assert np.all(ftd >= curves.spreads("country", "BB"))


def test_short_end_ftd_is_sum(curves):
    for g in curves.grades:
        s = curves.spreads("ftd", g)[0]
        parts = curves.spreads("standalone", g)[0] + curves.spreads("country", "BB")[0]
        se = math.hypot(curves.stderr("standalone", g)[0], curves.stderr("country", "BB")[0])
        assert abs(s - parts) <= 3 * max(se, curves.stderr("ftd", g)[0])


def test_sentinel_curve_equals_standalone():
    cs = em_corporate_curve(COUNTRY, {"BB": SECTOR["BB"]}, cfg=CFG, tenors=TENORS,
                            options=BasketOptions(lstar_c=math.inf))
    assert cs.spreads("em", "BB").tobytes() == cs.spreads("standalone", "BB").tobytes()


def test_single_names_do_not_depend_on_rho():
    out = [em_corporate_curve(COUNTRY, {"B": SECTOR["B"]}, rho=r, cfg=CFG, tenors=TENORS) for r in (0.0, 0.8)]
    # the country leg is pathwise identical; the corporate leg only in law
    assert out[0].spreads("country", "").tobytes() == out[1].spreads("country", "").tobytes()
    diff = np.abs(out[0].spreads("standalone", "B") - out[1].spreads("standalone", "B"))
    assert np.all(diff <= 3 * np.hypot(out[0].stderr("standalone", "B"), out[1].stderr("standalone", "B")))
    assert not np.array_equal(out[0].spreads("em", "B"), out[1].spreads("em", "B"))


def test_extension1_widens_affected_grades():
    base = em_corporate_curve(COUNTRY, SECTOR, cfg=CFG, tenors=TENORS)
    ext = em_corporate_curve(COUNTRY, SECTOR, cfg=CFG, tenors=TENORS, options=BasketOptions(extension1=True))
    for g in ("BB", "B"):
        assert np.all(ext.spreads("em", g) > base.spreads("em", g))
    for g in ("A", "BBB"):
        assert ext.spreads("em", g).tobytes() == base.spreads("em", g).tobytes()


def test_missing_parameters():
    with pytest.raises(MissingParametersError):
        em_corporate_curve(COUNTRY, SECTOR, cfg=CFG, tenors=TENORS, grades=["BBB+"])
    with pytest.raises(DomainError):
        em_corporate_curve(COUNTRY, SECTOR, cfg=CFG.replace(horizon=5), tenors=TENORS)


def test_simulate_for_spec_barriers():
    pair = simulate_for_spec(SECTOR["A"], COUNTRY, BasketSpec(lstar_c=math.inf, lstar_a=0.85),
                             PathConfig(horizon=1, dt=0.1, n_paths=10))
    assert pair.corporate.barriers == (0.85, 1.0)
    assert pair.country.barriers == (1.0,)
