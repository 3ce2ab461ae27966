"""Rating grades and the rating-dependent model tables.

Grades run on a notch scale from A+ (0) to B- (11), three notches per broad
grade, with the broad grades A, BBB, BB and B at notches 1, 4, 7 and 10.
Values for modified grades are interpolated linearly in notches between the
adjacent broad grades. A+ and B- lie outside the broad range and extrapolate
the nearest broad segment by one notch.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import total_ordering
from typing import Callable, Mapping

from .errors import DomainError, RatingRangeError

BROAD = ("A", "BBB", "BB", "B")
MODIFIERS = ("+", "", "-")

DEFAULT_LAMBDA = {"A": 0.125, "BBB": 0.25, "BB": 0.5, "B": 1.0}
DEFAULT_LSTAR_C = {"A": 1.45, "BBB": 1.35, "BB": 1.20, "B": 1.00}
DEFAULT_RHO = 0.8
EXTENSION1_LSTAR_A = 0.85

_PATTERN = re.compile(r"^\s*(BBB|BB|B|A)\s*([+-]?)\s*$")


@total_ordering
@dataclass(frozen=True)
class RatingGrade:
    """A broad rating with an optional ``+``/``-`` modifier.

    Grades compare by credit quality: ``A+`` is the highest, so ``A+ < B-``
    in notch order.
    """

    broad: str
    modifier: str = ""

    def __post_init__(self) -> None:
        if self.broad not in BROAD:
            raise RatingRangeError(f"broad rating must be one of {BROAD}, got {self.broad!r}")
        if self.modifier not in MODIFIERS:
            raise RatingRangeError(f"modifier must be '+', '' or '-', got {self.modifier!r}")

    @classmethod
    def parse(cls, text: str | RatingGrade) -> RatingGrade:
        if isinstance(text, RatingGrade):
            return text
        m = _PATTERN.match(str(text).upper())
        if not m:
            raise RatingRangeError(f"unrecognised rating {text!r}; expected A+ ... B-")
        return cls(m.group(1), m.group(2))

    @classmethod
    def from_notch(cls, notch: int) -> RatingGrade:
        if not 0 <= notch <= 11:
            raise RatingRangeError(f"notch {notch} outside A+ ... B-")
        return cls(BROAD[notch // 3], MODIFIERS[notch % 3])

    @property
    def notch(self) -> int:
        return 3 * BROAD.index(self.broad) + MODIFIERS.index(self.modifier)

    @property
    def is_broad(self) -> bool:
        return self.modifier == ""

    def __lt__(self, other: RatingGrade) -> bool:
        if not isinstance(other, RatingGrade):
            return NotImplemented
        return self.notch < other.notch

    def __str__(self) -> str:
        return self.broad + self.modifier


def broad_grades() -> tuple[RatingGrade, ...]:
    return tuple(RatingGrade(b) for b in BROAD)


def notch_weights(grade: RatingGrade | str) -> list[tuple[str, float]]:
    """Broad grades and weights whose mix gives ``grade``.

    ``BBB+`` is ``2/3 BBB + 1/3 A``; ``A+`` is ``4/3 A - 1/3 BBB``.
    """
    g = RatingGrade.parse(grade)
    if g.is_broad:
        return [(g.broad, 1.0)]
    k = BROAD.index(g.broad)
    step = -1 if g.modifier == "+" else 1
    other = k + step
    if 0 <= other < len(BROAD):
        return [(g.broad, 2.0 / 3.0), (BROAD[other], 1.0 / 3.0)]
    # outermost notches: continue the neighbouring broad segment
    inner = BROAD[k - step]
    return [(g.broad, 4.0 / 3.0), (inner, -1.0 / 3.0)]


def interpolate_by_notch(grade: RatingGrade | str, value_of: Callable[[str], float]) -> float:
    """Notch-linear mix of a broad-grade quantity for any grade."""
    return sum(w * value_of(b) for b, w in notch_weights(grade))


@dataclass(frozen=True)
class RatingSchemes:
    """Jump intensity and country barrier depth per broad grade."""

    lambda_of: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_LAMBDA))
    lstar_c_of: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_LSTAR_C))

    def __post_init__(self) -> None:
        for b in BROAD:
            if b not in self.lambda_of or b not in self.lstar_c_of:
                raise DomainError(f"rating tables must cover every broad grade, missing {b}")
            if not self.lambda_of[b] >= 0:
                raise DomainError(f"lambda for {b} must be non-negative, got {self.lambda_of[b]}")
            if not self.lstar_c_of[b] >= 1.0:
                raise DomainError(f"country barrier for {b} must be at least 1, got {self.lstar_c_of[b]}")

    def with_overrides(self, lambdas: Mapping[str, float] | None = None,
                       lstar_c: Mapping[str, float] | None = None) -> RatingSchemes:
        lam = dict(self.lambda_of)
        lc = dict(self.lstar_c_of)
        lam.update({RatingGrade.parse(k).broad: float(v) for k, v in (lambdas or {}).items()})
        lc.update({RatingGrade.parse(k).broad: float(v) for k, v in (lstar_c or {}).items()})
        return RatingSchemes(lam, lc)

    def lam(self, grade: RatingGrade | str) -> float:
        return max(0.0, interpolate_by_notch(grade, self.lambda_of.__getitem__))

    def lstar_c(self, grade: RatingGrade | str) -> float:
        return lstar_c_for_grade(grade, self)


def lstar_c_for_grade(grade: RatingGrade | str, schemes: RatingSchemes | None = None) -> float:
    """Country barrier depth for ``grade``, never shallower than the single-name barrier."""
    schemes = schemes or RatingSchemes()
    return max(1.0, interpolate_by_notch(grade, schemes.lstar_c_of.__getitem__))
