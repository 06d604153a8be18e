"""Independent reference implementations used as test oracles."""

from __future__ import annotations

import itertools
from functools import lru_cache

import mpmath
import numpy as np


def butterfly(u):
    """Plain recursive Kronecker encoding, ``x = [(a ^ b) G, b G]``."""
    u = [int(b) & 1 for b in u]
    if len(u) == 1:
        return u
    h = len(u) // 2
    a, b = butterfly(u[:h]), butterfly(u[h:])
    return [x ^ y for x, y in zip(a, b)] + b


def crc_long_division(bits, poly: int, width: int):
    """Remainder of ``msg * x**width`` modulo ``poly`` by shift-and-subtract."""
    reg = 0
    for b in list(bits) + [0] * width:
        reg = (reg << 1) | int(b)
        if reg >> width & 1:
            reg ^= poly
    return [(reg >> (width - 1 - i)) & 1 for i in range(width)]


def sc_decode(llr, fr, pc=None, lut=None, sat=None):
    """Recursive bit-by-bit SC with min-sum, zero/PC-frozen bits and routing.

    ``sat`` clips every g output to ``[-sat, sat]`` when given.
    """
    n = len(llr)
    pc = np.zeros(n, int) if pc is None else np.asarray(pc)
    lut = np.full(n, -1) if lut is None else np.asarray(lut)
    pcval = np.zeros(n, dtype=np.uint8)
    u = np.zeros(n, dtype=np.uint8)

    def decide(i, a):
        if pc[i]:
            bit = pcval[i]
        elif fr[i]:
            bit = 0
        else:
            bit = 1 if a < 0 else 0
        u[i] = bit
        if lut[i] >= 0:
            pcval[lut[i]] = bit
        return bit

    def rec(L, off):
        if len(L) == 1:
            return [decide(off, L[0])]
        h = len(L) // 2
        a, b = L[:h], L[h:]
        f = [(-1 if (x < 0) != (y < 0) else 1) * min(abs(x), abs(y)) for x, y in zip(a, b)]
        u1 = rec(f, off)
        p = butterfly(u1)
        g = [y - x if q else y + x for x, y, q in zip(a, b, p)]
        if sat is not None:
            g = [max(-sat, min(sat, v)) for v in g]
        return u1 + rec(g, off + h)

    rec(list(np.asarray(llr).tolist()), 0)
    return u


def channel_metric(llr, x):
    llr = np.asarray(llr, dtype=float)
    return float(np.sum(np.abs(llr) * ((llr < 0) != np.asarray(x, bool))))


def brute_force_ml(llr, fr):
    """Minimum channel metric over every codeword of the code with frozen mask ``fr``."""
    info = np.flatnonzero(np.asarray(fr) == 0)
    best = None
    for bits in itertools.product((0, 1), repeat=info.size):
        u = np.zeros(len(fr), dtype=np.uint8)
        u[info] = bits
        m = channel_metric(llr, butterfly(u))
        best = m if best is None else min(best, m)
    return best


# --------------------------------------------------------------------------- GA

mpmath.mp.dps = 60
_A, _B, _C = mpmath.mpf("-0.4527"), mpmath.mpf("0.86"), mpmath.mpf("0.0218")


def _phi_low(x):
    return min(mpmath.mpf(1), mpmath.exp(_A * x ** _B + _C)) if x > 0 else mpmath.mpf(1)


def _phi_high(x):
    return mpmath.sqrt(mpmath.pi / x) * mpmath.exp(-x / 4) * (1 - mpmath.mpf(10) / (7 * x))


def mp_phi(x):
    x = mpmath.mpf(x)
    return _phi_low(x) if x < 10 else _phi_high(x)


def _bisect(f, y, lo, hi):
    # f decreasing on [lo, hi]
    for _ in range(200):
        mid = (lo + hi) / 2
        if f(mid) > y:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def mp_phi_inv(y):
    """Inverse of the piecewise phi; where the branches overlap the low one wins."""
    if y >= 1:
        return mpmath.mpf(0)
    if y >= _phi_low(mpmath.mpf(10)):
        return _bisect(_phi_low, y, mpmath.mpf(0), mpmath.mpf(10))
    hi = mpmath.mpf(20)
    while _phi_high(hi) > y:
        hi *= 2
    return _bisect(_phi_high, y, mpmath.mpf(10), hi)


@lru_cache(maxsize=None)
def mp_check(a, b):
    if a <= 0 or b <= 0:
        return mpmath.mpf(0)
    pa, pb = mp_phi(a), mp_phi(b)
    return mp_phi_inv(pa + pb - pa * pb)


def ga_means_recursive(mu):
    """Input-position means by the textbook recursion on halves."""
    mu = [mpmath.mpf(float(v)) for v in mu]
    if len(mu) == 1:
        return mu
    h = len(mu) // 2
    a, b = mu[:h], mu[h:]
    return (ga_means_recursive([mp_check(x, y) for x, y in zip(a, b)])
            + ga_means_recursive([x + y for x, y in zip(a, b)]))
