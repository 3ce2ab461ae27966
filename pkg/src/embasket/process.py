"""Jump-diffusion credit barrier processes and first-passage simulation.

The log firm value of an entity follows

    dX = sigma dW - xi dJ + mu dt,    X_0 = 0,

where ``J`` is a compound Poisson process of rate ``lam`` with unit-mean
exponential marks, so each jump moves ``X`` down by an Exp(mean ``xi``)
amount. ``mu`` is fixed by requiring ``exp(X)`` to be a martingale. Default
at barrier depth ``L`` is the first time ``X`` drops strictly below ``-L``.

Simulation scheme
-----------------
* Jump times are exact (exponential inter-arrivals); the unit Brownian motion
  is sampled on a fixed grid of step ``dt`` and bridged to each jump time.
* On every diffusion sub-interval between grid and jump points, the minimum
  of the Brownian bridge is sampled exactly from its endpoints and one Exp(1)
  variate, so first passage is detected without discretisation bias. The
  recorded crossing time is the midpoint of the sub-interval; crossings caused
  by a jump are recorded at the jump time.
* All randomness comes from counter-based streams (:mod:`embasket.rng`) keyed
  by seed, path index, entity slot and driver. Output is identical for any
  split of the paths across workers.
* Because ``X`` is linear in ``sigma`` and ``xi`` given the drivers, re-running
  with the same seed and a different ``(sigma, xi)`` re-uses the same noise.

For a correlated pair the country occupies the *anchor* slot and the
corporate the *correlated* slot::

    W_c = Z_anchor,    W_a = rho Z_anchor + sqrt(1 - rho^2) Z_idio

The same mixing is applied to the normal variates that drive the bridge
minima, so ``rho = 1`` with equal parameters and no jumps gives identical
paths. The country path never depends on ``rho``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit
from scipy.special import ndtr

from . import rng
from .errors import DomainError, MissingBarrierError

SIGMA_MAX = 2.0
XI_MAX = 2.0
LAMBDA_MAX = 4.0
DEFAULT_DT = 1.0 / 250.0

# Largest Exp(1) bridge variate the streams can produce is about 78 (correlated
# slot, |G| <= sqrt(2) * 8.7); above this threshold a crossing is impossible
# and the draw is skipped.
_BRIDGE_SKIP = 100.0
# paths per partial sum in the conditional estimator; fixes the summation order
_SURVIVAL_BLOCK = 512


def martingale_drift(sigma: float, lam: float, xi: float) -> float:
    """Drift making ``exp(X_t)`` a martingale: ``-sigma^2/2 + lam*xi/(1+xi)``."""
    if sigma < 0 or lam < 0:
        raise DomainError(f"sigma and lambda must be non-negative (got {sigma}, {lam})")
    if lam > 0 and xi <= 0:
        raise DomainError(f"mean jump size must be positive when lambda > 0 (got {xi})")
    drift = -0.5 * sigma * sigma
    if lam > 0:
        drift += lam * xi / (1.0 + xi)
    return drift


@dataclass(frozen=True)
class ProcessParams:
    """Dynamics of one entity's log firm value."""

    sigma: float
    lam: float
    xi: float

    def __post_init__(self) -> None:
        if not 0.0 < self.sigma <= SIGMA_MAX:
            raise DomainError(f"sigma must lie in (0, {SIGMA_MAX}], got {self.sigma}")
        if not 0.0 < self.xi <= XI_MAX:
            raise DomainError(f"xi must lie in (0, {XI_MAX}], got {self.xi}")
        if not 0.0 <= self.lam <= LAMBDA_MAX:
            raise DomainError(f"lambda must lie in [0, {LAMBDA_MAX}], got {self.lam}")

    @property
    def mu(self) -> float:
        return martingale_drift(self.sigma, self.lam, self.xi)

    def replace(self, **changes) -> ProcessParams:
        values = {"sigma": self.sigma, "lam": self.lam, "xi": self.xi}
        values.update(changes)
        return ProcessParams(**values)


@dataclass(frozen=True)
class PathConfig:
    horizon: float = 10.0
    dt: float = DEFAULT_DT
    n_paths: int = 100_000
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise DomainError(f"dt must be positive, got {self.dt}")
        if not self.horizon > 0:
            raise DomainError(f"horizon must be positive, got {self.horizon}")
        if self.n_paths < 1:
            raise DomainError(f"n_paths must be at least 1, got {self.n_paths}")
        steps = self.horizon / self.dt
        if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
            raise DomainError(f"horizon {self.horizon} is not a multiple of dt {self.dt}")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def step(self) -> float:
        """Grid step actually used (horizon / n_steps)."""
        return self.horizon / self.n_steps

    def replace(self, **changes) -> PathConfig:
        values = {"horizon": self.horizon, "dt": self.dt, "n_paths": self.n_paths, "seed": self.seed}
        values.update(changes)
        return PathConfig(**values)


@dataclass(eq=False)
class CrossingRecord:
    """First-passage times of one entity at several barrier depths.

    ``times[p, j]`` is the crossing time of barrier ``barriers[j]`` on path
    ``p``, or ``inf`` when the barrier is not breached within ``horizon``.
    ``values[p, k]`` holds ``X`` at ``observe[k]`` when observation times were
    requested; ``jumps[p]`` counts jumps over the horizon when full paths were
    simulated.
    """

    barriers: tuple[float, ...]
    times: np.ndarray
    horizon: float
    observe: tuple[float, ...] = ()
    values: np.ndarray | None = None
    jumps: np.ndarray | None = None

    @property
    def n_paths(self) -> int:
        return self.times.shape[0]

    def times_for(self, level: float) -> np.ndarray:
        for j, b in enumerate(self.barriers):
            if b == level or (math.isfinite(level) and math.isclose(b, level, rel_tol=0, abs_tol=1e-12)):
                return self.times[:, j]
        raise MissingBarrierError(f"barrier {level} not simulated (have {self.barriers})")

    def values_at(self, t: float) -> np.ndarray:
        for k, o in enumerate(self.observe):
            if math.isclose(o, t, rel_tol=0, abs_tol=1e-9):
                return self.values[:, k]
        raise KeyError(f"time {t} not observed (have {self.observe})")

    def same_as(self, other: CrossingRecord) -> bool:
        """Bit-for-bit equality of every stored array."""
        if self.barriers != other.barriers or self.horizon != other.horizon or self.observe != other.observe:
            return False
        pairs = [(self.times, other.times), (self.values, other.values), (self.jumps, other.jumps)]
        for x, y in pairs:
            if (x is None) != (y is None):
                return False
            if x is not None and (x.shape != y.shape or x.tobytes() != y.tobytes()):
                return False
        return True


@dataclass(eq=False)
class PairRecord:
    """Joint crossing records for a corporate and its country on common paths."""

    corporate: CrossingRecord
    country: CrossingRecord
    rho: float
    params_a: ProcessParams = field(repr=False)
    params_c: ProcessParams = field(repr=False)


def diffusion_first_passage_cdf(sigma: float, mu: float, level: float, t):
    """P(min_{s<=t} (mu s + sigma W_s) < -level) for drifted Brownian motion.

    Vectorised over ``t``.
    """
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if level <= 0:
        raise DomainError(f"barrier level must be positive, got {level}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    sd = sigma * np.sqrt(tp)
    out[pos] = ndtr((-level - mu * tp) / sd) + np.exp(-2.0 * mu * level / sigma**2) * ndtr((-level + mu * tp) / sd)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# kernel


@njit(inline="always")
def _point(xv, t, bars, k, row):
    while k < bars.shape[0] and xv < -bars[k]:
        row[k] = t
        k += 1
    return k


@njit(nogil=True, cache=True)
def _bridge(a, b, delta, sig, bars, k, row, t_mid, g, lazy, seed, gp, step, corr, rho, rc):
    """Sample the bridge minimum on one sub-interval and record crossings.

    With ``lazy`` set the bridge normal is taken from the per-step bridge
    streams (mixed at ``rho`` for the correlated slot), otherwise ``g`` is
    used. Nothing is drawn when a crossing is impossible.
    """
    if k >= bars.shape[0]:
        return k
    lv = bars[k]
    da = a + lv
    db = b + lv
    if da > 0.0 and db > 0.0 and 2.0 * da * db > _BRIDGE_SKIP * sig * sig * delta:
        return k
    if lazy:
        g = rng.step_normal(seed, rng.BRIDGE_ANCHOR, step, gp)
        if corr:
            g = rho * g + rc * rng.step_normal(seed, rng.BRIDGE_IDIO, step, gp)
    e = rng.bridge_exponential(g)
    d = b - a
    m = 0.5 * (a + b - math.sqrt(d * d + 2.0 * sig * sig * delta * e))
    return _point(m, t_mid, bars, k, row)


@njit(nogil=True, cache=True)
def _draw_jump(seed, jtag, jblk, gp, lam, t_prev):
    u0, u1, u2, u3 = rng.stream_block(seed, jtag, jblk, gp)
    return t_prev - math.log(u0) / lam, -math.log(u1), rng.ndtri(u2), rng.ndtri(u3)


@njit(nogil=True, cache=True, error_model="numpy")
def _jump_step(i, t0, t1, w, w_end, sig, lam, xi, mu, seed, jtag, gp, bars, row, k,
               corr, rho, rc, jsum, nxt, jblk, mark, n1, g2, njumps):
    """Grid step [t0, t1] containing at least one jump."""
    s = t0
    ws = w
    xs = mu * t0 + sig * w - xi * jsum
    lazy = True
    gcur = 0.0
    while nxt < t1:
        tj = nxt
        span = t1 - s
        ww = ws + (tj - s) / span * (w_end - ws) + math.sqrt((tj - s) * (t1 - tj) / span) * n1
        x_pre = mu * tj + sig * ww - xi * jsum
        k = _bridge(xs, x_pre, tj - s, sig, bars, k, row, 0.5 * (s + tj), gcur, lazy,
                    seed, gp, i, corr, rho, rc)
        jsum += mark
        njumps += 1
        x_post = x_pre - xi * mark
        k = _point(x_post, tj, bars, k, row)
        s = tj
        ws = ww
        xs = x_post
        gcur = g2
        lazy = False
        nxt, mark, n1, g2 = _draw_jump(seed, jtag, jblk, gp, lam, tj)
        jblk += np.uint64(1)
    x_end = mu * t1 + sig * w_end - xi * jsum
    k = _bridge(xs, x_end, t1 - s, sig, bars, k, row, 0.5 * (s + t1), gcur, lazy,
                seed, gp, i, corr, rho, rc)
    return x_end, jsum, nxt, jblk, mark, n1, g2, njumps, k


@njit(inline="always")
def _init_row(row):
    for j in range(row.shape[0]):
        row[j] = math.inf


@njit(nogil=True, cache=True, error_model="numpy")
def _single_kernel(seed, path_start, n_steps, dt, sig, lam, xi, mu, bars,
                   out_t, out_x, out_j, obs_idx, full):
    n = out_t.shape[0]
    nb = bars.shape[0]
    n_obs = obs_idx.shape[0]
    sqdt = math.sqrt(dt)
    skip = _BRIDGE_SKIP * sig * sig * dt
    jtag = rng.JUMPS_ANCHOR
    for p in range(n):
        gp = np.uint64(path_start + p)
        row = out_t[p]
        _init_row(row)
        k = 0
        w = 0.0
        x = 0.0
        js = 0.0
        nj = 0
        jb = np.uint64(1)
        nxt = math.inf
        mk = 0.0
        na = 0.0
        ga = 0.0
        if lam > 0.0:
            nxt, mk, na, ga = _draw_jump(seed, jtag, np.uint64(0), gp, lam, 0.0)
        nxo = 0
        za = 0.0
        zb = 0.0
        zc = 0.0
        zd = 0.0
        for i in range(n_steps):
            j = i & 3
            if j == 0:
                za, zb, zc, zd = rng.block_normals(seed, rng.DIFFUSION_ANCHOR, np.uint64(i >> 2), gp)
            z = rng.pick(za, zb, zc, zd, j)
            t1 = (i + 1) * dt
            w_end = w + sqdt * z
            if nxt < t1:
                x, js, nxt, jb, mk, na, ga, nj, k = _jump_step(
                    i, i * dt, t1, w, w_end, sig, lam, xi, mu, seed, jtag, gp, bars, row, k,
                    False, 0.0, 1.0, js, nxt, jb, mk, na, ga, nj)
            else:
                x_end = mu * t1 + sig * w_end - xi * js
                if k < nb:
                    lv = bars[k]
                    da = x + lv
                    db = x_end + lv
                    if not (da > 0.0 and db > 0.0 and 2.0 * da * db > skip):
                        k = _bridge(x, x_end, dt, sig, bars, k, row, (i + 0.5) * dt, 0.0, True,
                                    seed, gp, i, False, 0.0, 1.0)
                x = x_end
            w = w_end
            if nxo < n_obs and obs_idx[nxo] == i + 1:
                out_x[p, nxo] = x
                nxo += 1
            if not full and nxo >= n_obs and k >= nb:
                break
        out_j[p] = nj


@njit(inline="always")
def _survive(da, db, sig2dt):
    # probability that a Brownian bridge between levels da, db above the barrier stays above it
    if da <= 0.0 or db <= 0.0:
        return 0.0
    return -math.expm1(-2.0 * da * db / sig2dt)


@njit(inline="always")
def _book(mass, grid, t, m):
    k = np.searchsorted(grid, t)
    if k < grid.shape[0]:
        mass[k] += m


@njit(nogil=True, cache=True, error_model="numpy")
def _survival_kernel(seed, block_start, n_blocks, n_paths, n_steps, dt, sig, lam, xi, mu, lv,
                     grid, s1, s2):
    """Per block of paths, sums of per-path default mass (and squares) up to each grid node."""
    sqdt = math.sqrt(dt)
    s2dt = sig * sig * dt
    g = grid.shape[0]
    mass = np.zeros(g)
    for bi in range(n_blocks):
        first = (block_start + bi) * _SURVIVAL_BLOCK
        last = min(first + _SURVIVAL_BLOCK, n_paths)
        for p in range(first, last):
            gp = np.uint64(p)
            mass[:] = 0.0
            surv = 1.0
            w = 0.0
            x = 0.0
            js = 0.0
            nxt = math.inf
            mk = 0.0
            n1 = 0.0
            jb = np.uint64(1)
            if lam > 0.0:
                nxt, mk, n1, _ = _draw_jump(seed, rng.JUMPS_ANCHOR, np.uint64(0), gp, lam, 0.0)
            za = 0.0
            zb = 0.0
            zc = 0.0
            zd = 0.0
            for i in range(n_steps):
                j = i & 3
                if j == 0:
                    za, zb, zc, zd = rng.block_normals(seed, rng.DIFFUSION_ANCHOR, np.uint64(i >> 2), gp)
                z = rng.pick(za, zb, zc, zd, j)
                t0 = i * dt
                t1 = (i + 1) * dt
                w_end = w + sqdt * z
                s = t0
                ws = w
                xs = x
                while nxt < t1:
                    tj = nxt
                    span = t1 - s
                    ww = ws + (tj - s) / span * (w_end - ws) + math.sqrt((tj - s) * (t1 - tj) / span) * n1
                    x_pre = mu * tj + sig * ww - xi * js
                    q = _survive(xs + lv, x_pre + lv, sig * sig * (tj - s))
                    _book(mass, grid, 0.5 * (s + tj), surv * (1.0 - q))
                    surv *= q
                    # jump survives only if its mark stays above the barrier; draw it from the truncated law
                    room = (x_pre + lv) / xi
                    pj = -math.expm1(-room) if room > 0.0 else 0.0
                    _book(mass, grid, tj, surv * (1.0 - pj))
                    surv *= pj
                    e = -math.log1p(math.expm1(-mk) * pj)
                    js += e
                    xs = x_pre - xi * e
                    s = tj
                    ws = ww
                    nxt, mk, n1, _ = _draw_jump(seed, rng.JUMPS_ANCHOR, jb, gp, lam, tj)
                    jb += np.uint64(1)
                x_end = mu * t1 + sig * w_end - xi * js
                if s == t0:
                    q = _survive(xs + lv, x_end + lv, s2dt)
                else:
                    q = _survive(xs + lv, x_end + lv, sig * sig * (t1 - s))
                _book(mass, grid, 0.5 * (s + t1), surv * (1.0 - q))
                surv *= q
                x = x_end
                w = w_end
                if surv == 0.0:
                    break
            c = 0.0
            for k in range(g):
                c += mass[k]
                s1[bi, k] += c
                s2[bi, k] += c * c


def conditional_default_probabilities(params: ProcessParams, level: float, cfg: PathConfig,
                                      grid: Sequence[float], *, workers: int = 1):
    """Default probabilities on ``grid`` by conditional Monte Carlo.

    Rather than sampling whether each path crosses, every path carries its
    survival probability given the simulated drivers: bridge non-crossing
    probabilities between grid points, and jumps drawn from the exponential
    law truncated at the barrier with the truncated mass booked as default.
    Default mass is timed like the crossing simulation (sub-interval midpoints
    and jump times), so both estimate the same curve. The estimate is a
    continuous function of ``(sigma, xi)`` at a fixed seed, which keeps
    derivative-free calibration away from Monte Carlo roughness.

    Returns
    -------
    (p, se)
        Estimates and their standard errors at each grid node.
    """
    if not level > 0:
        raise DomainError(f"barrier level must be positive, got {level}")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0) or grid[0] <= 0:
        raise DomainError("grid must be positive and strictly increasing")
    if grid[-1] > cfg.horizon + 1e-9:
        raise DomainError(f"grid end {grid[-1]} beyond horizon {cfg.horizon}")
    n = cfg.n_paths
    nb = -(-n // _SURVIVAL_BLOCK)
    s1 = np.zeros((nb, grid.size))
    s2 = np.zeros((nb, grid.size))
    seed = rng.seed_word(cfg.seed)

    def work(span):
        a, b = span
        _survival_kernel(seed, a, b - a, n, cfg.n_steps, cfg.step, params.sigma, params.lam,
                         params.xi, params.mu, float(level), grid, s1[a:b], s2[a:b])

    spans = _chunks(nb, workers)
    if len(spans) == 1:
        work(spans[0])
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            list(pool.map(work, spans))
    m1 = s1.sum(axis=0) / n
    m2 = s2.sum(axis=0) / n
    var = np.maximum(m2 - m1 * m1, 0.0) * n / max(n - 1, 1)
    return np.clip(m1, 0.0, 1.0), np.sqrt(var / n)


@njit(nogil=True, cache=True, error_model="numpy")
def _pair_kernel(seed, path_start, n_steps, dt, rho,
                 sig0, lam0, xi0, mu0, bars0, out_t0, out_x0, out_j0,
                 sig1, lam1, xi1, mu1, bars1, out_t1, out_x1, out_j1,
                 obs_idx, full):
    """Slot 0 is the anchor (country), slot 1 the correlated entity."""
    n = out_t0.shape[0]
    nb0 = bars0.shape[0]
    nb1 = bars1.shape[0]
    n_obs = obs_idx.shape[0]
    sqdt = math.sqrt(dt)
    rc = math.sqrt(max(0.0, 1.0 - rho * rho))
    skip0 = _BRIDGE_SKIP * sig0 * sig0 * dt
    skip1 = _BRIDGE_SKIP * sig1 * sig1 * dt
    jt0 = rng.JUMPS_ANCHOR
    jt1 = rng.JUMPS_CORRELATED
    for p in range(n):
        gp = np.uint64(path_start + p)
        row0 = out_t0[p]
        row1 = out_t1[p]
        _init_row(row0)
        _init_row(row1)
        k0 = 0
        k1 = 0
        w0 = 0.0
        w1 = 0.0
        x0 = 0.0
        x1 = 0.0
        js0 = 0.0
        js1 = 0.0
        nj0 = 0
        nj1 = 0
        jb0 = np.uint64(1)
        jb1 = np.uint64(1)
        nxt0 = math.inf
        mk0 = 0.0
        na0 = 0.0
        ga0 = 0.0
        if lam0 > 0.0:
            nxt0, mk0, na0, ga0 = _draw_jump(seed, jt0, np.uint64(0), gp, lam0, 0.0)
        nxt1 = math.inf
        mk1 = 0.0
        na1 = 0.0
        ga1 = 0.0
        if lam1 > 0.0:
            nxt1, mk1, na1, ga1 = _draw_jump(seed, jt1, np.uint64(0), gp, lam1, 0.0)
        nxo = 0
        za = 0.0
        zb = 0.0
        zc = 0.0
        zd = 0.0
        ya = 0.0
        yb = 0.0
        yc = 0.0
        yd = 0.0
        for i in range(n_steps):
            j = i & 3
            if j == 0:
                blk = np.uint64(i >> 2)
                za, zb, zc, zd = rng.block_normals(seed, rng.DIFFUSION_ANCHOR, blk, gp)
                ya, yb, yc, yd = rng.block_normals(seed, rng.DIFFUSION_IDIO, blk, gp)
            z0 = rng.pick(za, zb, zc, zd, j)
            z1 = rho * z0 + rc * rng.pick(ya, yb, yc, yd, j)
            t1 = (i + 1) * dt
            # anchor slot
            w_end = w0 + sqdt * z0
            if nxt0 < t1:
                x0, js0, nxt0, jb0, mk0, na0, ga0, nj0, k0 = _jump_step(
                    i, i * dt, t1, w0, w_end, sig0, lam0, xi0, mu0, seed, jt0, gp, bars0, row0, k0,
                    False, rho, rc, js0, nxt0, jb0, mk0, na0, ga0, nj0)
            else:
                x_end = mu0 * t1 + sig0 * w_end - xi0 * js0
                if k0 < nb0:
                    lv = bars0[k0]
                    da = x0 + lv
                    db = x_end + lv
                    if not (da > 0.0 and db > 0.0 and 2.0 * da * db > skip0):
                        k0 = _bridge(x0, x_end, dt, sig0, bars0, k0, row0, (i + 0.5) * dt, 0.0, True,
                                     seed, gp, i, False, rho, rc)
                x0 = x_end
            w0 = w_end
            # correlated slot
            w_end = w1 + sqdt * z1
            if nxt1 < t1:
                x1, js1, nxt1, jb1, mk1, na1, ga1, nj1, k1 = _jump_step(
                    i, i * dt, t1, w1, w_end, sig1, lam1, xi1, mu1, seed, jt1, gp, bars1, row1, k1,
                    True, rho, rc, js1, nxt1, jb1, mk1, na1, ga1, nj1)
            else:
                x_end = mu1 * t1 + sig1 * w_end - xi1 * js1
                if k1 < nb1:
                    lv = bars1[k1]
                    da = x1 + lv
                    db = x_end + lv
                    if not (da > 0.0 and db > 0.0 and 2.0 * da * db > skip1):
                        k1 = _bridge(x1, x_end, dt, sig1, bars1, k1, row1, (i + 0.5) * dt, 0.0, True,
                                     seed, gp, i, True, rho, rc)
                x1 = x_end
            w1 = w_end
            if nxo < n_obs and obs_idx[nxo] == i + 1:
                out_x0[p, nxo] = x0
                out_x1[p, nxo] = x1
                nxo += 1
            if not full and nxo >= n_obs and k0 >= nb0 and k1 >= nb1:
                break
        out_j0[p] = nj0
        out_j1[p] = nj1


def _check_barriers(barriers: Sequence[float], allow_empty: bool = False) -> np.ndarray:
    bars = np.asarray(list(barriers), dtype=float)
    if bars.ndim != 1 or (bars.size == 0 and not allow_empty):
        raise DomainError("at least one barrier level is required")
    if np.any(~(bars > 0)):
        raise DomainError(f"barrier levels must be positive, got {bars.tolist()}")
    if np.any(np.diff(bars) <= 0):
        raise DomainError(f"barrier levels must be strictly increasing, got {bars.tolist()}")
    return bars


def _observation_steps(observe: Sequence[float], cfg: PathConfig) -> np.ndarray:
    idx = []
    for t in observe:
        k = t / cfg.step
        if t <= 0 or t > cfg.horizon * (1 + 1e-12) or abs(k - round(k)) > 1e-6:
            raise DomainError(f"observation time {t} is not a grid point in (0, {cfg.horizon}]")
        idx.append(int(round(k)))
    idx = np.asarray(idx, dtype=np.int64)
    if np.any(np.diff(idx) <= 0):
        raise DomainError("observation times must be strictly increasing")
    return idx


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(int(workers), n))
    edges = np.linspace(0, n, workers + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _run(cfg, p0, bars0, p1, bars1, rho, observe, full, workers, mu_shift=0.0):
    n = cfg.n_paths
    two = p1 is not None
    obs_idx = _observation_steps(observe, cfg)
    nobs = obs_idx.size
    t0 = np.empty((n, bars0.size))
    x0 = np.zeros((n, nobs))
    j0 = np.zeros(n, dtype=np.int64)
    if two:
        t1 = np.empty((n, bars1.size))
        x1 = np.zeros((n, nobs))
        j1 = np.zeros(n, dtype=np.int64)
        s1, l1, xi1, mu1 = p1.sigma, p1.lam, p1.xi, p1.mu + mu_shift
    else:
        bars1 = np.empty(0)
        t1 = np.empty((n, 0))
        x1 = np.zeros((n, 0))
        j1 = np.zeros(n, dtype=np.int64)
        s1, l1, xi1, mu1 = 1.0, 0.0, 1.0, 0.0
    seed = rng.seed_word(cfg.seed)

    def work(span):
        a, b = span
        if two:
            _pair_kernel(seed, a, cfg.n_steps, cfg.step, float(rho),
                         p0.sigma, p0.lam, p0.xi, p0.mu + mu_shift, bars0, t0[a:b], x0[a:b], j0[a:b],
                         s1, l1, xi1, mu1, bars1, t1[a:b], x1[a:b], j1[a:b], obs_idx, bool(full))
        else:
            _single_kernel(seed, a, cfg.n_steps, cfg.step,
                           p0.sigma, p0.lam, p0.xi, p0.mu + mu_shift, bars0, t0[a:b], x0[a:b], j0[a:b],
                           obs_idx, bool(full))

    spans = _chunks(n, workers)
    if len(spans) == 1:
        work(spans[0])
    else:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            list(pool.map(work, spans))
    obs = tuple(float(t) for t in observe)
    rec0 = CrossingRecord(tuple(bars0.tolist()), t0, cfg.horizon, obs, x0 if nobs else None, j0 if full else None)
    rec1 = None
    if two:
        rec1 = CrossingRecord(tuple(bars1.tolist()), t1, cfg.horizon, obs, x1 if nobs else None, j1 if full else None)
    return rec0, rec1


def simulate_crossings(params: ProcessParams, barriers: Sequence[float], cfg: PathConfig, *,
                       observe: Sequence[float] = (), full: bool = False, workers: int = 1,
                       mu_shift: float = 0.0) -> CrossingRecord:
    """Simulate one entity and record first passage below each ``-L``.

    The entity uses the anchor stream slot, so its paths coincide with the
    country leg of :func:`simulate_pair_crossings` under the same seed.

    Parameters
    ----------
    observe
        Grid times at which to also store ``X`` (e.g. for martingale checks).
    full
        Simulate every path to the horizon even after all barriers are hit;
        needed for meaningful jump counts.
    workers
        Number of threads; output does not depend on it.
    mu_shift
        Added to the martingale drift. Only for fault-injection checks.
    """
    bars = _check_barriers(barriers)
    rec, _ = _run(cfg, params, bars, None, None, 0.0, observe, full, workers, mu_shift)
    return rec


def simulate_pair_crossings(params_a: ProcessParams, params_c: ProcessParams, rho: float,
                            barriers_a: Sequence[float], barriers_c: Sequence[float],
                            cfg: PathConfig, *, observe: Sequence[float] = (),
                            full: bool = False, workers: int = 1) -> PairRecord:
    """Simulate corporate (``a``) and country (``c``) on common joint scenarios.

    Brownian drivers are correlated at ``rho``; the jump processes are
    independent. The country leg is bit-identical for every ``rho``.
    """
    if not -1.0 <= rho <= 1.0:
        raise DomainError(f"correlation must lie in [-1, 1], got {rho}")
    bars_a = _check_barriers(barriers_a)
    bars_c = _check_barriers(barriers_c)
    rec_c, rec_a = _run(cfg, params_c, bars_c, params_a, bars_a, rho, observe, full, workers)
    return PairRecord(corporate=rec_a, country=rec_c, rho=float(rho), params_a=params_a, params_c=params_c)
