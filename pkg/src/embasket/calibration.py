"""Recover barrier-model parameters ``(sigma, xi)`` from target spread curves.

Every calibration prices through a spread oracle with a fixed seed, so model
spreads are deterministic functions of ``(sigma, xi)``: the Monte Carlo drivers
are shared by all candidates (common random numbers) and only rescaled. The
jump intensity is fixed per rating and never searched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares, minimize, minimize_scalar

from .default_curve import (
    DEFAULT_RECOVERY,
    DefaultCurve,
    DiscountCurve,
    par_spread,
    pricing_grid,
)
from .errors import DegenerateCreditError, DomainError, NonConvergenceError, UnderdeterminedError
from .process import SIGMA_MAX, XI_MAX, PathConfig, ProcessParams, conditional_default_probabilities
from .ratings import RatingGrade, RatingSchemes

SECTOR_TENORS = (2.0, 5.0, 10.0)
ACCEPT = 0.02
REJECT = 0.10
# loss at which the search stops restarting
GOOD = 1e-5
CALIBRATION_PATHS = 20_000
# steps on the monthly pricing grid: default mass is then booked to the exact interval
CALIBRATION_DT = 1.0 / 12.0
_LOWER = 0.01
_GRID = np.geomspace(0.05, 2.0, 5)

SpreadOracle = Callable[[float, float], np.ndarray]


@dataclass(frozen=True)
class CalibrationTarget:
    """Target spreads (decimal) at ``tenors`` for an entity with jump rate ``lam``."""

    tenors: tuple[float, ...]
    spreads: tuple[float, ...]
    lam: float
    label: str = ""

    def __post_init__(self) -> None:
        tenors = tuple(float(t) for t in self.tenors)
        spreads = tuple(float(s) for s in self.spreads)
        object.__setattr__(self, "tenors", tenors)
        object.__setattr__(self, "spreads", spreads)
        if len(tenors) != len(spreads) or not tenors:
            raise DomainError("tenors and spreads must be non-empty and of equal length")
        if any(t <= 0 for t in tenors):
            raise DomainError("target tenors must be positive")
        if any(not s >= 0 for s in spreads):
            raise DomainError("target spreads must be non-negative")
        if not self.lam >= 0:
            raise DomainError(f"lambda must be non-negative, got {self.lam}")

    @classmethod
    def sector(cls, spreads: Sequence[float], lam: float, label: str = "") -> CalibrationTarget:
        return cls(SECTOR_TENORS, tuple(spreads), lam, label)


@dataclass(frozen=True)
class CalibrationResult:
    sigma: float
    xi: float
    lam: float
    objective: float
    evaluations: int
    converged: bool
    label: str = ""

    @property
    def params(self) -> ProcessParams:
        return ProcessParams(self.sigma, self.lam, self.xi)


@dataclass(frozen=True)
class SectorCalibration:
    """Per-rating sigma with one shared xi.

    ``binding`` is set when forcing a common xi costs fit quality: the shared
    objective exceeds the worst rating's best objective over the xi values
    tried by more than ``ACCEPT / 4``.
    """

    results: dict[str, CalibrationResult]
    xi: float
    objective: float
    binding: bool
    evaluations: int
    converged: bool
    free_objectives: dict[str, float] = field(default_factory=dict)


def make_spread_oracle(lam: float, tenors: Sequence[float], cfg: PathConfig | None = None, *,
                       disc: DiscountCurve | None = None, recovery: float = DEFAULT_RECOVERY,
                       level: float = 1.0, workers: int = 1) -> SpreadOracle:
    """Deterministic ``(sigma, xi) -> spreads`` map at a fixed seed, memoised.

    Uses the conditional default-probability estimator, which is smooth in the
    parameters, so the optimiser sees no Monte Carlo roughness.
    """
    tenors = np.asarray(tenors, dtype=float)
    disc = disc or DiscountCurve()
    horizon = float(tenors.max())
    cfg = cfg or PathConfig(horizon=horizon, dt=CALIBRATION_DT, n_paths=CALIBRATION_PATHS)
    if cfg.horizon < horizon - 1e-12:
        raise DomainError(f"oracle horizon {cfg.horizon} shorter than tenor {horizon}")
    grid = pricing_grid(tenors)
    cache: dict[tuple[float, float], np.ndarray] = {}

    def oracle(sigma: float, xi: float) -> np.ndarray:
        key = (float(sigma), float(xi))
        if key not in cache:
            pd, se = conditional_default_probabilities(ProcessParams(key[0], lam, key[1]), level, cfg, grid,
                                                       workers=workers)
            curve = DefaultCurve(grid, pd, se, cfg.n_paths)
            cache[key] = np.array([par_spread(curve, disc, recovery, T) for T in tenors])
        return cache[key].copy()

    oracle.cache = cache
    oracle.lam = lam
    oracle.tenors = tuple(tenors.tolist())
    return oracle


def _signed_errors(model: np.ndarray, target: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        err = (model - target) / target
    err[(target == 0) & (model == 0)] = np.inf  # a zero target is never matched by a live credit
    return err


def _relative_errors(model: np.ndarray, target: np.ndarray) -> np.ndarray:
    return np.abs(_signed_errors(model, target))


class _Counted:
    """Objective wrapper counting evaluations and pricing failures as +inf."""

    def __init__(self, oracle: SpreadOracle, target: np.ndarray, loss: Callable[[np.ndarray], float]):
        self.oracle = oracle
        self.target = target
        self.loss = loss
        self.calls = 0

    def residuals(self, sigma: float, xi: float) -> np.ndarray:
        self.calls += 1
        try:
            model = self.oracle(sigma, xi)
        except DegenerateCreditError:
            return np.full(self.target.shape, np.inf)
        return _signed_errors(model, self.target)

    def __call__(self, sigma: float, xi: float) -> float:
        return self.loss(np.abs(self.residuals(sigma, xi)))


_LOG_LO = np.array([math.log(_LOWER), math.log(_LOWER)])
_LOG_HI = np.array([math.log(SIGMA_MAX), math.log(XI_MAX)])
# finite-difference step in log parameters; the oracle is smooth on this scale
_FD_STEP = 0.005
_BIG = 1e3
# log-xi points in the profile scan; fine enough to resolve the narrow basins seen at high sigma
_PROFILE_POINTS = 33


def _finite(r: np.ndarray) -> np.ndarray:
    return np.where(np.isfinite(r), r, _BIG)


def _solve_sigma(f: _Counted, log_xi: float, z0: float, iters: int = 12) -> tuple[float, float]:
    """Least-squares ``log sigma`` at fixed ``xi`` from ``z0``.

    Gauss-Newton with step halving; the slope is a forward difference at the
    start and a secant afterwards, so most iterations cost one evaluation. Returns
    ``(log_sigma, sum of squared residuals)``.
    """
    xi = math.exp(log_xi)
    lo, hi = _LOG_LO[0], _LOG_HI[0]

    def res(z):
        return _finite(f.residuals(math.exp(z), xi))

    z = min(max(z0, lo), hi)
    r = res(z)
    h = _FD_STEP if z + _FD_STEP <= hi else -_FD_STEP
    J = (res(z + h) - r) / h
    for _ in range(iters):
        jj = float(J @ J)
        if jj == 0.0:
            break
        dz = max(-1.0, min(1.0, -float(J @ r) / jj))
        z_new = min(max(z + dz, lo), hi)
        if z_new == z:
            break
        r_new = res(z_new)
        halvings = 0
        while r_new @ r_new > r @ r and halvings < 6:
            z_new = z + 0.5 * (z_new - z)
            r_new = res(z_new)
            halvings += 1
        if r_new @ r_new > r @ r:
            break
        J = (r_new - r) / (z_new - z)
        z, r = z_new, r_new
        if abs(dz) < 1e-6:
            break
    return z, float(r @ r)


def _profile_search(f: _Counted, z0: float) -> tuple[float, float]:
    """Minimise the sigma-profiled squared error over ``log xi``.

    A dense scan warm-starts each sigma solve from its neighbour; the three
    best brackets are then refined by bounded Brent. Returns ``(sigma, xi)``.
    """
    scan = np.linspace(_LOG_LO[1], _LOG_HI[1], _PROFILE_POINTS)
    warm = [z0]

    def profile(lx: float) -> float:
        z, v = _solve_sigma(f, lx, warm[0])
        warm[0] = z
        return v

    vals = []
    for lx in scan:
        vals.append((profile(lx), warm[0]))
    best = (math.inf, z0, scan[0])
    for j in np.argsort([v for v, _ in vals])[:3]:
        warm[0] = vals[j][1]
        m = minimize_scalar(profile, bounds=(scan[max(j - 1, 0)], scan[min(j + 1, scan.size - 1)]),
                            method="bounded", options={"xatol": 1e-6})
        z, v = _solve_sigma(f, m.x, warm[0])
        if v < best[0]:
            best = (v, z, m.x)
        if v < 1e-16:
            break
    return math.exp(best[1]), math.exp(best[2])


def _search_2d(f: _Counted, good: float, restarts: int = 2) -> tuple[float, float, float]:
    """Find ``(sigma, xi)`` minimising ``f``; returns ``(loss, sigma, xi)``.

    Stages, each skipped once ``f`` is at or below ``good``:

    1. a log-spaced grid scan;
    2. Levenberg-Marquardt on the relative residuals from the best grid points
       (coarse then fine finite differences);
    3. a profile search over ``xi``. At high ``sigma`` the fit has a long flat
       valley along which ``xi`` is weakly identified, with shallow local
       minima that trap local methods;
    4. a short simplex polish on ``f`` itself, which may be a worst-case
       rather than a squared loss.
    """
    grid = sorted((f(s, x), s, x) for s in _GRID for x in _GRID)
    best = grid[0]

    def consider(sigma, xi):
        nonlocal best
        v = f(sigma, xi)
        if v < best[0]:
            best = (v, sigma, xi)
        return best[0] <= good

    def res(z):
        zc = np.clip(z, _LOG_LO, _LOG_HI)
        r = f.residuals(math.exp(zc[0]), math.exp(zc[1]))
        # outside the box, price at the boundary and push back
        return _finite(r) + float(np.sum(np.abs(z - zc)))

    def jac_with(h0):
        def jac(z):
            r0 = res(z)
            J = np.empty((r0.size, 2))
            for k in range(2):
                zz = z.copy()
                zz[k] += h0
                J[:, k] = (res(zz) - r0) / h0
            return J
        return jac

    if best[0] <= good:
        return best
    for val, s, x in grid[:restarts]:
        if not math.isfinite(val):
            break
        z = np.array([math.log(s), math.log(x)])
        # coarse differences travel robustly along valleys, fine ones converge
        for h, nfev in ((4 * _FD_STEP, 25), (_FD_STEP, 25)):
            z = least_squares(res, z, jac=jac_with(h), method="lm",
                              xtol=1e-10, ftol=1e-12, gtol=1e-12, max_nfev=nfev).x
        z = np.clip(z, _LOG_LO, _LOG_HI)
        if consider(math.exp(z[0]), math.exp(z[1])):
            return best

    if consider(*_profile_search(f, math.log(best[1]))):
        return best

    def g(z):
        z = np.clip(z, _LOG_LO, _LOG_HI)
        v = f(math.exp(z[0]), math.exp(z[1]))
        return v if math.isfinite(v) else _BIG

    z0 = np.log([best[1], best[2]])
    step = 0.05
    polish = minimize(g, z0, method="Nelder-Mead",
                      options={"xatol": 1e-4, "fatol": good, "maxfev": 60,
                               "initial_simplex": [z0, z0 + [step, 0.0], z0 + [0.0, step]]})
    z = np.clip(polish.x, _LOG_LO, _LOG_HI)
    consider(math.exp(z[0]), math.exp(z[1]))
    return best


def calibrate_single(target: CalibrationTarget, oracle: SpreadOracle | None = None, *,
                     cfg: PathConfig | None = None, accept: float = ACCEPT,
                     reject: float = REJECT) -> CalibrationResult:
    """Minimise the worst relative spread error over the target tenors."""
    oracle = oracle or make_spread_oracle(target.lam, target.tenors, cfg)
    f = _Counted(oracle, np.asarray(target.spreads), lambda e: float(np.max(e)))
    obj, sigma, xi = _search_2d(f, GOOD)
    return _finish(target, sigma, xi, obj, f.calls, accept, reject)


def _finish(target, sigma, xi, obj, calls, accept, reject) -> CalibrationResult:
    result = CalibrationResult(sigma, xi, target.lam, obj, calls, obj <= accept, target.label)
    if not obj <= reject:
        raise NonConvergenceError(
            f"calibration{' of ' + target.label if target.label else ''} failed: best objective "
            f"{obj:.4g} above {reject} at sigma={sigma:.4g}, xi={xi:.4g}",
            best=result, objective=obj, label=target.label)
    return result


def calibrate_country(tenors: Sequence[float], spreads: Sequence[float], grade: RatingGrade | str,
                      schemes: RatingSchemes | None = None, oracle: SpreadOracle | None = None, *,
                      cfg: PathConfig | None = None, label: str = "", accept: float = ACCEPT,
                      reject: float = REJECT) -> CalibrationResult:
    """Least-squares fit in relative error over all quoted country tenors.

    The objective reported (and tested against the thresholds) is the worst
    relative error at the least-squares optimum, so it is comparable with the
    sector calibrations.
    """
    schemes = schemes or RatingSchemes()
    lam = schemes.lam(grade)
    target = CalibrationTarget(tuple(tenors), tuple(spreads), lam, label or str(grade))
    if len({round(t, 9) for t in target.tenors}) < 2:
        raise UnderdeterminedError("a country curve needs at least two distinct tenors")
    if lam <= 0:
        raise UnderdeterminedError("jump size cannot be identified with a zero jump intensity")
    oracle = oracle or make_spread_oracle(lam, target.tenors, cfg)
    tgt = np.asarray(target.spreads)
    f = _Counted(oracle, tgt, lambda e: float(np.sum(e * e)))
    _, sigma, xi = _search_2d(f, GOOD * GOOD)
    worst = float(np.max(_relative_errors(oracle(sigma, xi), tgt)))
    return _finish(target, sigma, xi, worst, f.calls, accept, reject)


def _start_sigma(f: _Counted, xi: float = 0.25) -> float:
    """Best grid ``log sigma`` at a central ``xi``; seeds the warm-started solves."""
    vals = [(f(s, xi), s) for s in _GRID]
    return math.log(min(vals)[1])


def calibrate_sector(targets: Mapping[str, CalibrationTarget],
                     oracles: Mapping[str, SpreadOracle] | None = None, *,
                     shared_xi: bool = True, cfg: PathConfig | None = None,
                     accept: float = ACCEPT, reject: float = REJECT) -> SectorCalibration:
    """Per-rating sigma against one common xi, minimising the worst rating error.

    The outer search runs over ``log xi`` (scan, then bounded Brent); for each
    candidate every rating's sigma is the least-squares solve warm-started
    from the previous candidate, and the objective is the worst relative
    error over all ratings and tenors. With ``shared_xi=False`` each rating
    is calibrated on its own.
    """
    if not targets:
        raise DomainError("at least one rating target is required")
    labels = list(targets)
    oracles = dict(oracles or {})
    for k in labels:
        if k not in oracles:
            oracles[k] = make_spread_oracle(targets[k].lam, targets[k].tenors, cfg)
    if not shared_xi:
        res = {k: calibrate_single(targets[k], oracles[k], accept=accept, reject=reject) for k in labels}
        worst = max(r.objective for r in res.values())
        return SectorCalibration(res, math.nan, worst, False, sum(r.evaluations for r in res.values()),
                                 worst <= accept, {k: r.objective for k, r in res.items()})

    fs = {k: _Counted(oracles[k], np.asarray(targets[k].spreads), lambda e: float(np.max(e))) for k in labels}
    warm = {k: _start_sigma(fs[k]) for k in labels}
    seen: dict[float, dict[str, tuple[float, float]]] = {}

    def inner(k: str, log_xi: float) -> tuple[float, float]:
        z, _ = _solve_sigma(fs[k], log_xi, warm[k])
        warm[k] = z
        return math.exp(z), fs[k](math.exp(z), math.exp(log_xi))

    def outer(log_xi: float) -> float:
        key = float(log_xi)
        if key not in seen:
            seen[key] = {k: inner(k, key) for k in labels}
        return max(v for _, v in seen[key].values())

    scan = np.linspace(_LOG_LO[1], _LOG_HI[1], 13)
    vals = [outer(x) for x in scan]
    j = int(np.argmin(vals))
    lo_x, hi_x = scan[max(j - 1, 0)], scan[min(j + 1, scan.size - 1)]
    best = minimize_scalar(outer, bounds=(lo_x, hi_x), method="bounded", options={"xatol": 1e-4})
    log_xi = best.x if best.fun <= vals[j] else scan[j]
    objective = outer(log_xi)
    xi = math.exp(log_xi)
    free = {k: min(seen[x][k][1] for x in seen) for k in labels}
    binding = objective - max(free.values()) > accept / 4
    calls = sum(f.calls for f in fs.values())
    results = {}
    for k in labels:
        sigma, obj = seen[float(log_xi)][k]
        results[k] = CalibrationResult(sigma, xi, targets[k].lam, obj, fs[k].calls, obj <= accept, k)
    out = SectorCalibration(results, xi, objective, binding, calls, objective <= accept, free)
    if not objective <= reject:
        worst = max(results, key=lambda k: results[k].objective)
        raise NonConvergenceError(
            f"sector calibration failed: objective {objective:.4g} above {reject}, worst rating {worst}",
            best=out, objective=objective, label=worst)
    return out
