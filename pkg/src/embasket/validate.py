"""Self-checks of the simulation and pricing stack, reported as plain data.

Every check returns a :class:`CheckResult`; failures are report content, not
exceptions. ``inject_drift`` adds a constant to the martingale drift of the
simulated processes so that the martingale and oracle checks can be seen to
fail.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import __version__
from .basket import em_corporate_curve
from .curve_fit import ParametricSpreadCurve, Quote, fit_sector
from .default_curve import DiscountCurve, estimate_default_curve, linearized_spread_stderr, spread_curve
from .process import (
    DEFAULT_DT,
    PathConfig,
    ProcessParams,
    diffusion_first_passage_cdf,
    simulate_crossings,
)
from .reference import REFERENCE_CALIBRATIONS

VALIDATION_PATHS = 100_000
PRECISION_PATHS = 100_000
PRECISION_LIMIT = 0.005
MARTINGALE_TIMES = (1.0, 5.0, 10.0)
ORACLE_TENORS = (1.0, 2.0, 5.0, 10.0)
# small runs for the checks that compare exact outputs
_DETERMINISM_PATHS = 20_000


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str  # "pass", "fail" or "skipped"
    detail: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ValidationReport:
    version: str
    n_paths: int
    dt: float
    seed: int
    checks: tuple[CheckResult, ...]

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def to_json(self) -> dict:
        counts = {s: sum(c.status == s for c in self.checks) for s in ("pass", "fail", "skipped")}
        return {"version": self.version, "n_paths": self.n_paths, "dt": self.dt, "seed": self.seed,
                "summary": counts, "checks": [asdict(c) for c in self.checks]}


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def check_martingale(params: ProcessParams, cfg: PathConfig, label: str, *, workers: int = 1,
                     inject_drift: float = 0.0) -> CheckResult:
    """``|mean(e^X_T) - 1| <= 3 SE`` at each time in ``MARTINGALE_TIMES``."""
    times = tuple(t for t in MARTINGALE_TIMES if t <= cfg.horizon)
    rec = simulate_crossings(params, [math.inf], cfg, observe=times, workers=workers, mu_shift=inject_drift)
    rows = []
    ok = True
    for t in times:
        ex = np.exp(rec.values_at(t))
        mean = float(ex.mean())
        se = float(ex.std(ddof=1) / math.sqrt(ex.size))
        z = (mean - 1.0) / se
        ok &= abs(z) <= 3.0
        rows.append({"t": t, "mean": mean, "se": se, "z": z})
    return CheckResult(f"martingale[{label}]", _status(ok),
                       {"sigma": params.sigma, "lam": params.lam, "xi": params.xi, "times": rows})


def check_oracle(cfg: PathConfig, *, workers: int = 1, inject_drift: float = 0.0) -> CheckResult:
    """Pure diffusion against the closed-form first-passage probability."""
    p = ProcessParams(0.2, 0.0, 0.25)
    rec = simulate_crossings(p, [1.0], cfg, workers=workers, mu_shift=inject_drift)
    tenors = np.array([t for t in ORACLE_TENORS if t <= cfg.horizon])
    curve = estimate_default_curve(rec.times[:, 0], tenors)
    exact = diffusion_first_passage_cdf(p.sigma, p.mu, 1.0, tenors)
    # standard error of the estimator under the exact law; the sample one vanishes when nothing crosses
    se = np.sqrt(exact * (1 - exact) / rec.n_paths)
    tol = np.maximum(3 * se, 0.01 * exact)
    dev = np.abs(curve.p - exact)
    return CheckResult("oracle", _status(bool(np.all(dev <= tol))),
                       {"tenors": tenors.tolist(), "mc": curve.p.tolist(), "exact": exact.tolist(),
                        "deviation": dev.tolist(), "tolerance": tol.tolist()})


def check_barrier_monotonicity(params: ProcessParams, cfg: PathConfig, *, workers: int = 1) -> CheckResult:
    """Shallower barriers are hit no later, path by path."""
    bars = [0.85, 1.0, 1.2, 1.45]
    rec = simulate_crossings(params, bars, cfg, workers=workers)
    bad = int(np.sum(np.any(rec.times[:, :-1] > rec.times[:, 1:], axis=1)))
    return CheckResult("barrier_monotonicity", _status(bad == 0), {"barriers": bars, "violating_paths": bad})


def check_jump_count(params: ProcessParams, cfg: PathConfig, *, workers: int = 1) -> CheckResult:
    """Mean jump count matches ``lam * T`` within 3 SE."""
    rec = simulate_crossings(params, [math.inf], cfg, full=True, workers=workers)
    expected = params.lam * cfg.horizon
    mean = float(rec.jumps.mean())
    se = math.sqrt(expected / rec.n_paths)
    z = (mean - expected) / se if se > 0 else 0.0
    return CheckResult("jump_count", _status(abs(z) <= 3.0),
                       {"lam": params.lam, "horizon": cfg.horizon, "mean": mean, "expected": expected, "z": z})


def check_determinism(params: ProcessParams, cfg: PathConfig, *, workers: int = 1) -> CheckResult:
    """Identical records on repeat and across worker counts."""
    small = cfg.replace(n_paths=min(cfg.n_paths, _DETERMINISM_PATHS))
    a = simulate_crossings(params, [1.0, 1.2], small, workers=1)
    b = simulate_crossings(params, [1.0, 1.2], small, workers=1)
    c = simulate_crossings(params, [1.0, 1.2], small, workers=max(2, workers))
    ok = a.same_as(b) and a.same_as(c)
    return CheckResult("determinism", _status(ok), {"n_paths": small.n_paths, "workers": [1, max(2, workers)]})


def check_precision(params: ProcessParams, cfg: PathConfig, label: str, *, workers: int = 1) -> CheckResult:
    """5y spread standard error at most 0.5% of the spread."""
    if cfg.n_paths < PRECISION_PATHS:
        return CheckResult(f"precision[{label}]", "skipped",
                           {"reason": f"needs at least {PRECISION_PATHS} paths, have {cfg.n_paths}"})
    rec = simulate_crossings(params, [1.0], cfg, workers=workers)
    tau = rec.times[:, 0]
    curve = spread_curve(tau, [5.0], DiscountCurve())
    s = float(curve.spreads[0])
    se_lin = float(linearized_spread_stderr(tau, 5.0, DiscountCurve()))
    se_pert = float(curve.stderr[0])
    ratio = se_lin / s
    return CheckResult(f"precision[{label}]", _status(ratio <= PRECISION_LIMIT),
                       {"spread": s, "se": se_lin, "relative_se": ratio, "relative_se_perturbation": se_pert / s,
                        "limit": PRECISION_LIMIT})


def check_basket_ordering(cfg: PathConfig, *, workers: int = 1) -> CheckResult:
    """Standalone <= EM <= plain first-to-default on common paths, exactly."""
    ref = REFERENCE_CALIBRATIONS[0]
    small = cfg.replace(n_paths=min(cfg.n_paths, _DETERMINISM_PATHS))
    cs = em_corporate_curve(ref.country_params, ref.sector_params(), cfg=small, workers=workers)
    bad = []
    for g in cs.grades:
        sa, em, ftd = cs.spreads("standalone", g), cs.spreads("em", g), cs.spreads("ftd", g)
        if not (np.all(sa <= em) and np.all(em <= ftd)):
            bad.append(g)
    return CheckResult("basket_ordering", _status(not bad), {"grades": cs.grades, "violations": bad})


def check_curve_fit_round_trip() -> CheckResult:
    """Fit on quotes generated from known parameters recovers them."""
    truth = ParametricSpreadCurve({"A": (math.log(0.008), math.log(0.004)),
                                   "BBB": (math.log(0.015), math.log(0.006)),
                                   "BB": (math.log(0.03), math.log(0.012)),
                                   "B": (math.log(0.05), math.log(0.02))}, 0.35)
    quotes = [Quote(t, float(truth.broad_spread(g, t)), g) for g in truth.params for t in (1, 3, 5, 7, 10)]
    fit = fit_sector(quotes)
    worst = float(np.max(np.abs(fit.residuals)))
    err = max(abs(fit.curve.params[g][i] - truth.params[g][i]) for g in truth.params for i in range(2))
    err = max(err, abs(fit.curve.theta - truth.theta))
    return CheckResult("curve_fit_round_trip", _status(worst <= 1e-6 and err <= 1e-6),
                       {"max_relative_residual": worst, "max_parameter_error": err})


def run_validation(n_paths: int = VALIDATION_PATHS, dt: float = DEFAULT_DT, seed: int = 0, *,
                   workers: int = 1, inject_drift: float = 0.0) -> ValidationReport:
    cfg = PathConfig(horizon=10.0, dt=dt, n_paths=n_paths, seed=seed)
    ref = REFERENCE_CALIBRATIONS[0]
    sector = ref.sector_params()
    checks = [
        check_martingale(ref.country_params, cfg, ref.country, workers=workers, inject_drift=inject_drift),
        check_martingale(sector["B"], cfg, f"{ref.sector} B", workers=workers, inject_drift=inject_drift),
        check_oracle(cfg, workers=workers, inject_drift=inject_drift),
        check_barrier_monotonicity(sector["BB"], cfg, workers=workers),
        check_jump_count(sector["B"], cfg, workers=workers),
        check_determinism(ref.country_params, cfg, workers=workers),
        check_precision(ref.country_params, cfg, ref.country, workers=workers),
        check_basket_ordering(cfg, workers=workers),
        check_curve_fit_round_trip(),
    ]
    return ValidationReport(__version__, n_paths, dt, seed, tuple(checks))
