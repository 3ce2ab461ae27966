"""Counter-based random streams for the path simulator.

Every random number used by the simulator is a pure function of
``(seed, stream tag, path index, block index)``: one Philox4x64-10 block per
counter value, giving four 64-bit words. Paths can therefore be generated in
any order, on any number of workers, and draws that are not needed (e.g. bridge
noise far from the barrier) can simply be skipped without shifting the rest of
the stream.

The block function is bit-compatible with ``numpy.random.Philox``: the first
four raw outputs of ``Philox(key=k, counter=c)`` equal ``philox4x64(c + 1, k)``.
"""
from __future__ import annotations

import math

import numpy as np
from llvmlite import ir
from numba import njit, types
from numba.extending import intrinsic

_M0 = np.uint64(0xD2E7470EE14C6C93)
_M1 = np.uint64(0xCA5A826395121157)
_W0 = np.uint64(0x9E3779B97F4A7C15)
_W1 = np.uint64(0xBB67AE8584CAA73B)
_SHIFT = np.uint64(11)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)

# stream tags (second key word); diffusion and bridge streams pack four grid
# steps per block
DIFFUSION_ANCHOR = np.uint64(1)
DIFFUSION_IDIO = np.uint64(2)
JUMPS_ANCHOR = np.uint64(3)
JUMPS_CORRELATED = np.uint64(4)
BRIDGE_ANCHOR = np.uint64(5)
BRIDGE_IDIO = np.uint64(6)

MASK64 = (1 << 64) - 1


@intrinsic
def _mulhilo(typingctx, a, b):
    sig = types.UniTuple(types.uint64, 2)(types.uint64, types.uint64)

    def codegen(context, builder, signature, args):
        wide = ir.IntType(128)
        prod = builder.mul(builder.zext(args[0], wide), builder.zext(args[1], wide))
        hi = builder.trunc(builder.lshr(prod, ir.Constant(wide, 64)), ir.IntType(64))
        lo = builder.trunc(prod, ir.IntType(64))
        return context.make_tuple(builder, signature.return_type, (hi, lo))

    return sig, codegen


@njit(inline="always")
def _round(c0, c1, c2, c3, k0, k1):
    hi0, lo0 = _mulhilo(_M0, c0)
    hi1, lo1 = _mulhilo(_M1, c2)
    return hi1 ^ c1 ^ k0, lo1, hi0 ^ c3 ^ k1, lo0


@njit(nogil=True, cache=True)
def philox4x64(c0, c1, c2, c3, k0, k1):
    """Philox4x64-10 block function on a 256-bit counter and 128-bit key."""
    c0, c1, c2, c3 = _round(c0, c1, c2, c3, k0, k1)
    for _ in range(9):
        k0 = k0 + _W0
        k1 = k1 + _W1
        c0, c1, c2, c3 = _round(c0, c1, c2, c3, k0, k1)
    return c0, c1, c2, c3


@njit(inline="always")
def to_unit(x):
    # open interval (0, 1), 53-bit resolution
    return ((x >> _SHIFT) + 0.5) * 1.1102230246251565e-16


@njit(inline="always")
def ndtri(p):
    """Standard normal quantile, Wichura's AS241 (PPND16), ~1e-16 relative."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                    + 67265.770927008700853) * r + 45921.953931549871457) * r
                  + 13731.693765509461125) * r + 1971.5909503065514427) * r
                + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                    + 39307.89580009271061) * r + 21213.794301586595867) * r
                  + 5394.1960214247511077) * r + 687.1870074920579083) * r
                + 42.313330701600911252) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                    + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                  + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                    + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                  + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                + 0.59983220655588793769) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(inline="always")
def bridge_exponential(g):
    """Map a standard normal to an Exp(1) variate via -log(Phi(g))."""
    return -math.log(0.5 * math.erfc(-g * _INV_SQRT2))


@njit(nogil=True, cache=True)
def stream_block(seed, tag, block, path):
    """Four open-interval uniforms for ``(seed, tag)`` at ``(block, path)``."""
    a, b, c, d = philox4x64(block, path, np.uint64(0), np.uint64(0), seed, tag)
    return to_unit(a), to_unit(b), to_unit(c), to_unit(d)


@njit(inline="always")
def block_normals(seed, tag, block, path):
    """Four normal variates from one block (computed together for ILP)."""
    u0, u1, u2, u3 = stream_block(seed, tag, block, path)
    return ndtri(u0), ndtri(u1), ndtri(u2), ndtri(u3)


@njit(inline="always")
def pick(u0, u1, u2, u3, j):
    if j == 0:
        return u0
    if j == 1:
        return u1
    if j == 2:
        return u2
    return u3


@njit(nogil=True, cache=True)
def step_normal(seed, tag, step, path):
    """Normal variate for grid step ``step`` of a four-per-block stream."""
    u0, u1, u2, u3 = stream_block(seed, tag, np.uint64(step >> 2), path)
    return ndtri(pick(u0, u1, u2, u3, step & 3))


def seed_word(seed: int) -> np.uint64:
    """Reduce an arbitrary Python int seed to the 64-bit key word."""
    return np.uint64(int(seed) & MASK64)


def raw_block(counter, key) -> tuple[int, int, int, int]:
    """Python-level access to one Philox block (used by tests and tools)."""
    c = [np.uint64(int(v) & MASK64) for v in counter]
    k = [np.uint64(int(v) & MASK64) for v in key]
    return tuple(int(v) for v in philox4x64(c[0], c[1], c[2], c[3], k[0], k[1]))
