"""Published sector/country calibrations used for replays and validation.

Each entry pairs a country with one sector on one date. Corporate ratings
share a single jump size; jump rates come from the default rating scheme.
Some sectors have no B-rated curve.
"""
from __future__ import annotations

from dataclasses import dataclass

from .process import ProcessParams
from .ratings import RatingSchemes


@dataclass(frozen=True)
class ReferenceCalibration:
    label: str
    sector: str
    country: str
    country_grade: str
    country_lam: float
    sigma_c: float
    xi_c: float
    sigma_a: dict[str, float]
    xi_a: float

    @property
    def country_params(self) -> ProcessParams:
        return ProcessParams(self.sigma_c, self.country_lam, self.xi_c)

    def sector_params(self, schemes: RatingSchemes | None = None) -> dict[str, ProcessParams]:
        schemes = schemes or RatingSchemes()
        return {g: ProcessParams(s, schemes.lam(g), self.xi_a) for g, s in self.sigma_a.items()}


def _row(label, sector, country, grade, lam, sc, xc, sa, xa):
    ratings = ("A", "BBB", "BB", "B")
    return ReferenceCalibration(label, sector, country, grade, lam, sc, xc,
                                {g: s for g, s in zip(ratings, sa)}, xa)


REFERENCE_CALIBRATIONS: tuple[ReferenceCalibration, ...] = (
    _row("food-brazil-2016-01", "Food", "Brazil", "BB", 0.5, 0.32, 0.25, (0.18, 0.16, 0.16, 0.15), 0.27),
    _row("food-brazil-2017-10", "Food", "Brazil", "BB", 0.5, 0.25, 0.13, (0.16, 0.14, 0.11, 0.14), 0.25),
    _row("mining-peru-2016-01", "Mining", "Peru", "BBB+", 0.2, 0.22, 0.25, (0.27, 0.29, 0.38, 0.62), 0.27),
    _row("mining-peru-2017-10", "Mining", "Peru", "BBB+", 0.2, 0.20, 0.17, (0.16, 0.14, 0.14, 0.17), 0.24),
    _row("oilgas-russia-2016-01", "Oil&Gas", "Russia", "BB", 0.5, 0.26, 0.23, (0.23, 0.26, 0.33), 0.30),
    _row("oilgas-russia-2017-10", "Oil&Gas", "Russia", "BB", 0.5, 0.18, 0.17, (0.16, 0.14, 0.15), 0.25),
    _row("banks-turkey-2016-01", "Banks", "Turkey", "BB", 0.5, 0.23, 0.25, (0.17, 0.16, 0.21), 0.27),
    _row("banks-turkey-2017-10", "Banks", "Turkey", "BB", 0.5, 0.25, 0.14, (0.15, 0.15, 0.15), 0.23),
    _row("realestate-china-2016-01", "Real Estate", "China", "A", 0.125, 0.21, 0.24,
         (0.15, 0.23, 0.23, 0.27), 0.22),
    _row("realestate-china-2017-10", "Real Estate", "China", "A", 0.125, 0.17, 0.20,
         (0.18, 0.18, 0.18, 0.21), 0.21),
)


def reference(label: str) -> ReferenceCalibration:
    for r in REFERENCE_CALIBRATIONS:
        if r.label == label:
            return r
    raise KeyError(f"unknown reference calibration {label!r}")
