"""Parametric sector spread curves ``s_k(T) = e^{a_k} + e^{b_k - theta T}``.

One ``(a_k, b_k)`` pair per broad rating and a shared decay rate ``theta``.
``e^{a_k}`` is the long-end spread and ``e^{a_k} + e^{b_k}`` the short end.
Modified grades are notch-linear mixes of the adjacent broad curves.
"""
from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import lsq_linear, minimize_scalar

from .errors import DomainError, FitError, MissingParametersError
from .ratings import BROAD, RatingGrade, notch_weights

THETA_BOUNDS = (0.05, 2.0)
_FLOOR = 1e-12


@dataclass(frozen=True)
class Quote:
    """One observed spread (decimal) at ``tenor`` years."""

    tenor: float
    spread: float
    grade: RatingGrade
    weight: float = 1.0
    name: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "grade", RatingGrade.parse(self.grade))
        if not 0.0 < self.tenor <= 30.0:
            raise DomainError(f"quote tenor must lie in (0, 30], got {self.tenor}")
        if not 0.0 < self.spread < 0.5:
            raise DomainError(f"quote spread must lie in (0, 0.5), got {self.spread}")
        if not self.weight > 0:
            raise DomainError(f"quote weight must be positive, got {self.weight}")


def eval_parametric(a: float, b: float, theta: float, T):
    """``e^a + e^{b - theta T}``."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise DomainError("maturity must be non-negative")
    out = np.exp(a) + np.exp(b - theta * T)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ParametricSpreadCurve:
    """Fitted ``(a_k, b_k)`` per broad rating and shared ``theta``."""

    params: dict[str, tuple[float, float]]
    theta: float

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise DomainError(f"theta must be positive, got {self.theta}")

    def broad_spread(self, broad: str, T):
        if broad not in self.params:
            raise MissingParametersError(f"no fitted curve for broad rating {broad}")
        a, b = self.params[broad]
        return eval_parametric(a, b, self.theta, T)

    def spread(self, grade: RatingGrade | str, T):
        return interpolate_grade_spread(self, grade, T)

    def ordering_violations(self, T: float = 5.0) -> list[str]:
        """Adjacent fitted broad grades whose spreads at ``T`` are out of order."""
        present = [b for b in BROAD if b in self.params]
        out = []
        for hi, lo in zip(present, present[1:]):
            if self.broad_spread(lo, T) < self.broad_spread(hi, T):
                out.append(f"{lo} below {hi} at {T:g}y")
        return out


def interpolate_grade_spread(curve: ParametricSpreadCurve, grade: RatingGrade | str, T):
    """Spread for any grade A+ ... B-, mixing adjacent broad curves by notch."""
    return sum(w * curve.broad_spread(b, T) for b, w in notch_weights(grade))


@dataclass(frozen=True)
class SectorFit:
    """Fitted curve with per-quote relative residuals and fit diagnostics."""

    curve: ParametricSpreadCurve
    quotes: tuple[Quote, ...]
    residuals: np.ndarray
    objective: float
    diagnostics: tuple[str, ...] = field(default=())
    excluded: tuple[str, ...] = field(default=())


def _design(quotes: Sequence[Quote], broads: list[str]):
    tenors = np.array([q.tenor for q in quotes])
    W = np.zeros((len(quotes), len(broads)))
    for i, q in enumerate(quotes):
        for b, w in notch_weights(q.grade):
            W[i, broads.index(b)] = w
    return tenors, W


def _solve_linear(theta, tenors, W, spreads, sw):
    # columns: long-end levels A_k, then short-end excess B_k
    M = np.hstack([W, W * np.exp(-theta * tenors)[:, None]])
    scale = sw / spreads
    res = lsq_linear(M * scale[:, None], spreads * scale, bounds=(_FLOOR, np.inf),
                     method="bvls", lsmr_tol=None)
    coef = res.x
    resid = (M @ coef - spreads) / spreads
    return coef, resid


def fit_sector(quotes: Sequence[Quote], theta_bounds: tuple[float, float] = THETA_BOUNDS) -> SectorFit:
    """Fit the sector parameterisation by weighted relative least squares.

    For fixed ``theta`` the model is linear in ``(e^{a_k}, e^{b_k})``, so the
    inner problem is a non-negative linear least-squares solve and ``theta``
    is found by a one-dimensional search (grid scan, then bounded Brent).
    Broad ratings with fewer than two own-grade quotes are dropped with a
    diagnostic, together with any modified-grade quote that needs them.
    """
    quotes = tuple(quotes)
    if not quotes:
        raise FitError("no quotes supplied")
    diagnostics: list[str] = []
    counts = Counter(q.grade.broad for q in quotes)
    excluded = sorted((b for b in BROAD if 0 < counts[b] < 2), key=BROAD.index)
    for b in excluded:
        diagnostics.append(f"rating {b} excluded: {counts[b]} quote(s), need at least 2")
    broads = [b for b in BROAD if counts[b] >= 2]
    if not broads:
        raise FitError("no rating has enough quotes to fit; " + "; ".join(diagnostics))
    kept = []
    for q in quotes:
        needed = {b for b, _ in notch_weights(q.grade)}
        if needed <= set(broads):
            kept.append(q)
        else:
            diagnostics.append(f"quote {q.name or q.grade} {q.tenor:g}y dropped: needs "
                               f"{', '.join(sorted(needed - set(broads)))}")
    if len({round(q.tenor, 9) for q in kept}) < 3:
        raise FitError("theta is not identifiable: fewer than three distinct tenors")
    tenors, W = _design(kept, broads)
    spreads = np.array([q.spread for q in kept])
    sw = np.sqrt(np.array([q.weight for q in kept]))

    def objective(log_theta):
        _, r = _solve_linear(math.exp(log_theta), tenors, W, spreads, sw)
        return float(np.sum((sw * r) ** 2))

    lo, hi = math.log(theta_bounds[0]), math.log(theta_bounds[1])
    scan = np.linspace(lo, hi, 61)
    vals = np.array([objective(x) for x in scan])
    k = int(np.argmin(vals))
    a, b = scan[max(k - 1, 0)], scan[min(k + 1, scan.size - 1)]
    best = minimize_scalar(objective, bounds=(a, b), method="bounded",
                           options={"xatol": 1e-12, "maxiter": 500})
    log_theta = best.x if best.fun <= vals[k] else scan[k]
    theta = math.exp(log_theta)
    coef, resid = _solve_linear(theta, tenors, W, spreads, sw)
    n = len(broads)
    params = {bk: (math.log(coef[j]), math.log(coef[n + j])) for j, bk in enumerate(broads)}
    curve = ParametricSpreadCurve(params, theta)
    if theta <= theta_bounds[0] * (1 + 1e-6) or theta >= theta_bounds[1] * (1 - 1e-6):
        diagnostics.append(f"theta {theta:.4g} at the edge of its search range")
    for bk in broads:
        if coef[n + broads.index(bk)] <= 10 * _FLOOR:
            diagnostics.append(f"rating {bk}: short-end excess at its floor (flat fitted curve)")
    violations = curve.ordering_violations()
    if violations:
        msg = "fitted curves out of rating order: " + ", ".join(violations)
        diagnostics.append(msg)
        warnings.warn(msg, stacklevel=2)
    return SectorFit(curve, tuple(kept), resid, float(np.sum((sw * resid) ** 2)),
                     tuple(diagnostics), tuple(excluded))
