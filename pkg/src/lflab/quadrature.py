"""1D quadrature: adaptive panel-doubling Simpson and fixed-order Gauss-Legendre."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import QuadratureError

RTOL = 1e-10
ATOL = 1e-14
MAX_DOUBLINGS = 24
START_PANELS = 64


def simpson(f, a: float, b: float, rtol=RTOL, atol=ATOL, max_doublings=MAX_DOUBLINGS, panels=START_PANELS):
    """Composite Simpson, doubling the panel count until two estimates agree.

    Stops when |S_2n - S_n| <= max(rtol |S_2n|, atol).  Function values are
    reused across doublings, so each refinement only evaluates the new
    midpoints.  ``f`` must be vectorized.
    """
    if b <= a:
        return 0.0
    n = panels
    x = np.linspace(a, b, n + 1)
    fx = np.asarray(f(x), dtype=np.float64)
    prev = _simpson_from_values(fx, (b - a) / n)
    prev_prev = prev
    for _ in range(max_doublings):
        n *= 2
        step = (b - a) / n
        mid = a + step * np.arange(1, n, 2)
        fm = np.asarray(f(mid), dtype=np.float64)
        merged = np.empty(n + 1)
        merged[0::2] = fx
        merged[1::2] = fm
        fx = merged
        cur = _simpson_from_values(fx, step)
        if abs(cur - prev) <= max(rtol * abs(cur), atol):
            return cur
        prev_prev, prev = prev, cur
    raise QuadratureError(
        f"Simpson quadrature on [{a}, {b}] did not converge after {max_doublings} doublings",
        estimates=(prev_prev, prev),
    )


def _simpson_from_values(fx, step):
    # fx has an odd number of samples (even number of subintervals)
    return step / 3.0 * (fx[0] + fx[-1] + 4.0 * fx[1:-1:2].sum() + 2.0 * fx[2:-1:2].sum())


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    """Nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(order)


def gl_nodes(a: float, b: float, order: int = 32):
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = gauss_legendre(order)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w
