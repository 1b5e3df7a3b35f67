"""Slow reference implementations used only by tests.

Nothing here imports the code under test beyond plain data types.
"""

import itertools
import math

import numpy as np


def window_sets(N, n, j, sides, centered):
    """Yield clipped index slices of every cube containing node ``j``."""
    for s in sides:
        if centered:
            r = (s - 1) // 2
            starts = [tuple(ji - r for ji in j)]
        else:
            starts = itertools.product(*[range(ji - s + 1, ji + 1) for ji in j])
        for st in starts:
            yield tuple(slice(max(a, 0), min(a + s, N)) for a in st)


def brute_maximal(values, j, sides, q=1.0, centered=False):
    N = values.shape[0]
    a = np.abs(values) ** q
    best = 0.0
    for sl in window_sets(N, values.ndim, j, sides, centered):
        best = max(best, float(np.mean(a[sl])))
    return best ** (1.0 / q)


def brute_sharp(values, j, sides, centered=False):
    N = values.shape[0]
    best = 0.0
    for sl in window_sets(N, values.ndim, j, sides, centered):
        w = values[sl]
        best = max(best, float(np.mean(np.abs(w - np.mean(w)))))
    return best


def direct_dft(u, x, xi, dx):
    """uhat(xi_k) = dx^n sum_m u(x_m) exp(-i <x_m, xi_k>) by explicit summation."""
    xs = x.reshape(-1, x.shape[-1])
    ks = xi.reshape(-1, xi.shape[-1])
    out = np.exp(-1j * ks @ xs.T) @ u.reshape(-1)
    return (dx ** xs.shape[-1] * out).reshape(xi.shape[:-1])


def plastic_number():
    """Real root of t^3 = t + 1 by bisection (independent of the grid code)."""
    lo, hi = 1.0, 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid**3 - mid - 1 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def closed_form_gaussian_ft(xi):
    return math.sqrt(2 * math.pi) * np.exp(-xi**2 / 2)
