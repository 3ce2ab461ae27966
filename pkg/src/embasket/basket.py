"""Two-barrier basket default times and EM corporate spread curves.

An EM corporate defaults at the first of its own default (log firm value
below ``-L*_a``) and a sovereign crisis deep enough to drag it down (country
log firm value below ``-L*_c``). One construction covers several cases:

* plain first-to-default: ``L*_a = L*_c = 1``;
* modified first-to-default: ``L*_a = 1`` and a rating-dependent ``L*_c >= 1``;
* sector repricing: ``L*_a < 1`` for selected grades;
* quasi-sovereign issuers: ``L*_a > 1`` and ``L*_c = 1``.

``L*_c = inf`` switches the country off and recovers standalone risk.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .default_curve import DEFAULT_RECOVERY, DiscountCurve, SpreadCurve, spread_curve
from .errors import DomainError, MissingParametersError
from .process import PairRecord, PathConfig, ProcessParams, simulate_pair_crossings
from .ratings import DEFAULT_RHO, EXTENSION1_LSTAR_A, RatingGrade, RatingSchemes

CURVE_IDS = ("em", "standalone", "country", "ftd")


@dataclass(frozen=True)
class BasketSpec:
    """Barrier depths and correlation defining one basket default time."""

    lstar_c: float
    lstar_a: float = 1.0
    rho: float = DEFAULT_RHO

    def __post_init__(self) -> None:
        if not self.lstar_a > 0 or not self.lstar_c > 0:
            raise DomainError(f"barrier depths must be positive, got {self.lstar_a}, {self.lstar_c}")
        if not -1.0 <= self.rho <= 1.0:
            raise DomainError(f"correlation must lie in [-1, 1], got {self.rho}")

    @classmethod
    def plain_ftd(cls, rho: float = DEFAULT_RHO) -> BasketSpec:
        return cls(lstar_c=1.0, lstar_a=1.0, rho=rho)

    @classmethod
    def standalone(cls, rho: float = DEFAULT_RHO) -> BasketSpec:
        return cls(lstar_c=math.inf, lstar_a=1.0, rho=rho)


@dataclass(frozen=True)
class BasketOptions:
    """How barrier depths are chosen per rating.

    ``lstar_a`` is the corporate depth for every grade unless the sector
    repricing flag applies to the grade's broad rating. In quasi-sovereign
    mode the country barrier is 1 for every grade. ``lstar_c`` forces one
    country depth for all grades (e.g. ``inf`` to switch the country off).
    """

    lstar_a: float = 1.0
    extension1: bool = False
    extension1_grades: tuple[str, ...] = ("BB", "B")
    extension1_lstar_a: float = EXTENSION1_LSTAR_A
    quasi_sovereign: bool = False
    lstar_c: float | None = None

    def spec_for(self, grade: RatingGrade | str, schemes: RatingSchemes, rho: float) -> BasketSpec:
        g = RatingGrade.parse(grade)
        lstar_a = self.lstar_a
        if self.extension1 and g.broad in {RatingGrade.parse(x).broad for x in self.extension1_grades}:
            lstar_a = self.extension1_lstar_a
        if self.lstar_c is not None:
            lstar_c = self.lstar_c
        elif self.quasi_sovereign:
            lstar_c = 1.0
        else:
            lstar_c = schemes.lstar_c(g)
        return BasketSpec(lstar_c=lstar_c, lstar_a=lstar_a, rho=rho)


def basket_default_samples(joint: PairRecord, spec: BasketSpec) -> np.ndarray:
    """Per-path basket default time ``min(tau_a(L*_a), tau_c(L*_c))``."""
    if not math.isclose(joint.rho, spec.rho, abs_tol=1e-12):
        raise DomainError(f"records were simulated at rho={joint.rho}, basket asks for rho={spec.rho}")
    tau_a = joint.corporate.times_for(spec.lstar_a)
    if math.isinf(spec.lstar_c):
        return tau_a.copy()
    return np.minimum(tau_a, joint.country.times_for(spec.lstar_c))


def simulate_for_spec(params_a: ProcessParams, params_c: ProcessParams, spec: BasketSpec,
                      cfg: PathConfig, *, workers: int = 1) -> PairRecord:
    """Pair simulation carrying the barriers needed for ``spec`` and both single names."""
    bars_a = sorted({1.0, spec.lstar_a})
    bars_c = sorted({1.0} | ({spec.lstar_c} if math.isfinite(spec.lstar_c) else set()))
    return simulate_pair_crossings(params_a, params_c, spec.rho, bars_a, bars_c, cfg, workers=workers)


@dataclass(frozen=True)
class CurveSet:
    """Spread curves keyed by ``(curve_id, grade)``.

    ``curve_id`` is one of ``em``, ``standalone``, ``country`` and ``ftd``;
    the country curve is stored under the sovereign grade label.
    """

    tenors: np.ndarray
    curves: dict[tuple[str, str], SpreadCurve]
    specs: dict[str, BasketSpec] = field(default_factory=dict)

    def spreads(self, curve_id: str, grade: RatingGrade | str) -> np.ndarray:
        return self.curves[(curve_id, str(grade))].spreads

    def stderr(self, curve_id: str, grade: RatingGrade | str) -> np.ndarray:
        return self.curves[(curve_id, str(grade))].stderr

    @property
    def grades(self) -> list[str]:
        return [g for (cid, g) in self.curves if cid == "em"]


def em_corporate_curve(country_params: ProcessParams,
                       sector_params_by_rating: Mapping[RatingGrade | str, ProcessParams],
                       schemes: RatingSchemes | None = None, rho: float = DEFAULT_RHO,
                       cfg: PathConfig | None = None, tenors: Sequence[float] = (0.5, 1, 2, 3, 5, 7, 10),
                       *, grades: Sequence[RatingGrade | str] | None = None,
                       options: BasketOptions | None = None, disc: DiscountCurve | None = None,
                       recovery: float = DEFAULT_RECOVERY, country_grade: str = "",
                       workers: int = 1) -> CurveSet:
    """EM corporate, standalone, country and plain first-to-default curves per rating.

    Each rating's corporate-country pair is simulated once and every curve for
    that rating is read off the same paths. Because the country occupies the
    anchor stream slot its paths are shared by all ratings.
    """
    schemes = schemes or RatingSchemes()
    options = options or BasketOptions()
    disc = disc or DiscountCurve()
    tenors = np.asarray(tenors, dtype=float)
    params = {str(RatingGrade.parse(g)): p for g, p in sector_params_by_rating.items()}
    wanted = [str(RatingGrade.parse(g)) for g in grades] if grades is not None else sorted(
        params, key=lambda g: RatingGrade.parse(g).notch)
    if not wanted:
        raise MissingParametersError("no ratings to price")
    missing = [g for g in wanted if g not in params]
    if missing:
        raise MissingParametersError(f"no parameters supplied for rating(s) {', '.join(missing)}")
    horizon = float(tenors.max())
    if cfg is None:
        cfg = PathConfig(horizon=horizon)
    elif cfg.horizon < horizon - 1e-12:
        raise DomainError(f"simulation horizon {cfg.horizon} shorter than longest tenor {horizon}")

    curves: dict[tuple[str, str], SpreadCurve] = {}
    specs: dict[str, BasketSpec] = {}
    for g in wanted:
        spec = options.spec_for(g, schemes, rho)
        specs[g] = spec
        joint = simulate_for_spec(params[g], country_params, spec, cfg, workers=workers)
        price = lambda tau: spread_curve(tau, tenors, disc, recovery)
        curves[("em", g)] = price(basket_default_samples(joint, spec))
        curves[("standalone", g)] = price(joint.corporate.times_for(1.0))
        curves[("ftd", g)] = price(np.minimum(joint.corporate.times_for(1.0), joint.country.times_for(1.0)))
        if ("country", country_grade) not in curves:
            curves[("country", country_grade)] = price(joint.country.times_for(1.0))
    return CurveSet(tenors, curves, specs)
