"""Cumulative default curves and par CDS spreads from default-time samples.

Spreads are decimals per year throughout; basis points appear only at the I/O
boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateCreditError, DomainError, TenorRangeError

DEFAULT_RECOVERY = 0.40
DEFAULT_RATE = 0.02
PRICING_STEP = 1.0 / 12.0


@dataclass(frozen=True)
class DefaultCurve:
    """Cumulative default probability ``p`` on ``grid`` with standard errors."""

    grid: np.ndarray
    p: np.ndarray
    se: np.ndarray
    n_paths: int

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        p = np.asarray(self.p, dtype=float)
        se = np.asarray(self.se, dtype=float)
        if grid.ndim != 1 or grid.size == 0 or p.shape != grid.shape or se.shape != grid.shape:
            raise DomainError("grid, p and se must be equal-length non-empty vectors")
        if np.any(np.diff(grid) <= 0) or grid[0] <= 0:
            raise DomainError("grid must be positive and strictly increasing")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "se", se)

    def at(self, t: float) -> float:
        """Linear interpolation of ``P`` with ``P(0) = 0``."""
        return float(np.interp(t, np.r_[0.0, self.grid], np.r_[0.0, self.p]))


@dataclass(frozen=True)
class DiscountCurve:
    """Riskfree discounting: flat ``rate`` or piecewise-constant forwards.

    With ``knots = (t1, ..., tn)`` and ``forwards = (f1, ..., fn)`` the forward
    rate is ``f_i`` on ``(t_{i-1}, t_i]`` and ``f_n`` beyond ``t_n``.
    """

    rate: float = DEFAULT_RATE
    knots: tuple[float, ...] = ()
    forwards: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if len(self.knots) != len(self.forwards):
            raise DomainError("knots and forwards must have equal length")
        if self.knots and (self.knots[0] <= 0 or np.any(np.diff(self.knots) <= 0)):
            raise DomainError("forward knots must be positive and increasing")

    def discount(self, t):
        t = np.asarray(t, dtype=float)
        if not self.knots:
            return np.exp(-self.rate * t)
        knots = np.asarray(self.knots)
        fwd = np.asarray(self.forwards)
        starts = np.r_[0.0, knots[:-1]]
        # time spent in each forward bucket, last bucket open-ended
        ends = np.r_[knots[:-1], np.inf]
        spent = np.clip(t[..., None] - starts, 0.0, ends - starts)
        return np.exp(-(spent * fwd).sum(axis=-1))


def _check_recovery(recovery: float) -> None:
    if not 0.0 <= recovery < 1.0:
        raise DomainError(f"recovery must lie in [0, 1), got {recovery}")


def estimate_default_curve(default_times, grid: Sequence[float]) -> DefaultCurve:
    """Empirical cumulative default probability of a default-time sample.

    ``default_times`` holds one time per path, ``inf`` for survival.
    """
    tau = np.asarray(default_times, dtype=float).ravel()
    if tau.size == 0:
        raise DomainError("cannot estimate a default curve from an empty sample")
    grid = np.asarray(grid, dtype=float)
    n = tau.size
    p = np.searchsorted(np.sort(tau), grid, side="right") / n
    se = np.sqrt(p * (1.0 - p) / n)
    return DefaultCurve(grid, p, se, n)


def pricing_grid(tenors: Sequence[float], step: float = PRICING_STEP) -> np.ndarray:
    """Regular grid of ``step`` up to the longest tenor, with the tenors merged in."""
    tenors = np.asarray(tenors, dtype=float)
    if tenors.size == 0 or np.any(tenors <= 0):
        raise DomainError("tenors must be positive")
    top = tenors.max()
    n = int(math.floor(top / step + 1e-9))
    nodes = np.r_[np.arange(1, n + 1) * step, tenors]
    nodes = np.unique(np.round(nodes, 12))
    return nodes


def _legs(t, P, disc: DiscountCurve, recovery: float):
    B = disc.discount(t)
    B_mid = disc.discount(0.5 * (t[1:] + t[:-1]))
    protection = (1.0 - recovery) * np.sum(B_mid * np.diff(P))
    f = B * (1.0 - P)
    annuity = np.sum(0.5 * np.diff(t) * (f[1:] + f[:-1]))
    return protection, annuity


def _truncate(grid, p, T):
    t = np.r_[0.0, grid]
    P = np.r_[0.0, p]
    if T <= 0 or T > grid[-1] * (1 + 1e-12):
        raise TenorRangeError(f"maturity {T} outside curve grid (0, {grid[-1]}]")
    k = np.searchsorted(t, T, side="left")
    if k < t.size and abs(t[k] - T) <= 1e-12:
        return t[: k + 1], P[: k + 1]
    pT = np.interp(T, t, P)
    return np.r_[t[:k], T], np.r_[P[:k], pT]


def par_spread(curve: DefaultCurve, disc: DiscountCurve | None = None,
               recovery: float = DEFAULT_RECOVERY, maturity: float = 5.0) -> float:
    """Par spread from the default leg and the risky annuity on the curve grid.

    The protection leg sums ``B(midpoint) * dP`` over grid intervals and the
    annuity integrates ``B (1 - P)`` with the trapezoid rule. ``P(0) = 0`` is
    implied and ``P`` is interpolated linearly at an off-grid maturity.
    """
    disc = disc or DiscountCurve()
    _check_recovery(recovery)
    if np.all(curve.p >= 1.0):
        raise DegenerateCreditError("default is certain at every grid tenor; risky PV01 is zero")
    t, P = _truncate(curve.grid, curve.p, float(maturity))
    protection, annuity = _legs(t, P, disc, recovery)
    if annuity <= 0:
        raise DegenerateCreditError("risky PV01 is zero")
    return float(protection / annuity)


@dataclass(frozen=True)
class SpreadCurve:
    """Par spreads and their standard errors at a set of tenors."""

    tenors: np.ndarray
    spreads: np.ndarray
    stderr: np.ndarray
    default_curve: DefaultCurve = field(repr=False)


def spread_curve(default_times, tenors: Sequence[float], disc: DiscountCurve | None = None,
                 recovery: float = DEFAULT_RECOVERY, step: float = PRICING_STEP) -> SpreadCurve:
    """Par spread curve with a standard error from shifting ``P`` by one ``se``.

    The error is half the spread difference between curves bumped up and down
    by one pointwise standard error, which is conservative because it treats
    the default and premium legs as fully correlated.
    """
    disc = disc or DiscountCurve()
    tenors = np.asarray(tenors, dtype=float)
    curve = estimate_default_curve(default_times, pricing_grid(tenors, step))
    up = DefaultCurve(curve.grid, np.minimum(curve.p + curve.se, 1.0), curve.se, curve.n_paths)
    down = DefaultCurve(curve.grid, np.maximum(curve.p - curve.se, 0.0), curve.se, curve.n_paths)
    spreads = np.array([par_spread(curve, disc, recovery, T) for T in tenors])
    stderr = np.empty_like(spreads)
    for i, T in enumerate(tenors):
        try:
            hi = par_spread(up, disc, recovery, T)
        except DegenerateCreditError:
            hi = spreads[i]
        stderr[i] = 0.5 * abs(hi - par_spread(down, disc, recovery, T))
    return SpreadCurve(tenors, spreads, stderr, curve)


def linearized_spread_stderr(default_times, maturity: float, disc: DiscountCurve | None = None,
                             recovery: float = DEFAULT_RECOVERY, step: float = PRICING_STEP) -> float:
    """Delta-method standard error of the par spread estimator.

    The spread is a ratio of two sample means (protection and annuity per
    path); its error follows from the sample variance of the per-path
    influence ``(N_i - s D_i) / mean(D)``.
    """
    disc = disc or DiscountCurve()
    _check_recovery(recovery)
    tau = np.asarray(default_times, dtype=float).ravel()
    n = tau.size
    if n < 2:
        raise DomainError("need at least two paths for a standard error")
    grid = pricing_grid([maturity], step)
    t = np.r_[0.0, grid]
    B = disc.discount(t)
    B_mid = disc.discount(0.5 * (t[1:] + t[:-1]))
    # interval (t[k], t[k+1]] containing each default
    k = np.searchsorted(t, tau, side="left") - 1
    hit = (tau <= maturity) & (tau > 0)
    N = np.where(hit, (1.0 - recovery) * B_mid[np.clip(k, 0, B_mid.size - 1)], 0.0)
    # the trapezoid rule is linear in B (1 - P): weight each node the path survives
    w = np.r_[0.5 * (t[1] - t[0]), 0.5 * (t[2:] - t[:-2]), 0.5 * (t[-1] - t[-2])] * B
    alive = np.searchsorted(t, tau, side="left")
    D = np.r_[0.0, np.cumsum(w)][alive]
    s = N.mean() / D.mean()
    infl = (N - s * D) / D.mean()
    return float(infl.std(ddof=1) / math.sqrt(n))
