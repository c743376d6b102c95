"""Adaptive Simpson quadrature for the 1-D oracle integrals."""

from __future__ import annotations

from collections.abc import Callable

import numpy as np


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-9,
    max_depth: int = 60,
) -> tuple[float, float]:
    """Integrate ``f`` over ``[a, b]`` by adaptive Simpson's rule.

    Returns ``(value, error_estimate)``. The error estimate is the sum of
    ``|S2 - S1|`` over accepted panels, fifteen times the usual Richardson
    estimate; the smaller figure can undershoot on peaked integrands over
    wide ranges.
    """
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, err = adaptive_simpson(f, b, a, tol, max_depth)
        return -value, err

    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    error = 0.0
    # explicit stack: (a, b, fa, fm, fb, whole, tol, depth)
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, s, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi)
        delta = left + right - s
        if abs(delta) <= 15.0 * eps or depth >= max_depth:
            total += left + right + delta / 15.0
            error += abs(delta)
        else:
            stack.append((mid, hi, fmid, frm, fhi, right, 0.5 * eps, depth + 1))
            stack.append((lo, mid, flo, flm, fmid, left, 0.5 * eps, depth + 1))
    return total, error


def integrate_density(
    f: Callable[[float], float],
    density: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-9,
) -> tuple[float, float]:
    """Integrate ``f(x) * density(x)`` over ``[a, b]``."""
    return adaptive_simpson(lambda x: f(x) * density(x), a, b, tol=tol)


def gaussian_density(mu: float, sigma: float) -> Callable[[float], float]:
    c = 1.0 / (sigma * np.sqrt(2.0 * np.pi))
    return lambda x: c * np.exp(-0.5 * ((x - mu) / sigma) ** 2)
