"""Bracketed root finding for monotone scalar functions."""

import math


def expand_bracket(f, start, lo_limit, hi_limit, factor=2.0):
    """Grow a bracket geometrically from ``start`` until ``f`` changes sign.

    ``f`` must be decreasing.  Returns ``(lo, hi)`` with ``f(lo) >= 0 >= f(hi)``,
    or ``None`` if no sign change occurs inside ``[lo_limit, hi_limit]``.
    """
    x = min(max(start, lo_limit), hi_limit)
    fx = f(x)
    if fx == 0:
        return x, x
    if fx > 0:
        lo = x
        while x < hi_limit:
            x = min(x * factor, hi_limit)
            if f(x) <= 0:
                return lo, x
            lo = x
        return None
    hi = x
    while x > lo_limit:
        x = max(x / factor, lo_limit)
        if f(x) >= 0:
            return x, hi
        hi = x
    return None


def bisect_decreasing(f, lo, hi, tol, with_derivative=False, x0=None, max_iter=300):
    """Root of a decreasing ``f`` on ``[lo, hi]`` where ``f(lo) >= 0 >= f(hi)``.

    Plain bisection.  With ``with_derivative=True``, ``f`` returns
    ``(value, derivative)`` and Newton steps are taken whenever they land
    strictly inside the current bracket.  Stops when the bracket (or the
    last Newton step) is below ``tol * max(1, |x|)``.
    """
    if lo > hi:
        lo, hi = hi, lo
    x = x0 if x0 is not None and lo < x0 < hi else 0.5 * (lo + hi)
    for _ in range(max_iter):
        if with_derivative:
            fx, d = f(x)
        else:
            fx, d = f(x), None
        if fx == 0:
            return x
        if fx > 0:
            lo = x
        else:
            hi = x
        scale = tol * max(1.0, abs(x))
        if hi - lo <= scale:
            return 0.5 * (lo + hi)
        x_new = None
        if d is not None:
            if d < 0 and math.isfinite(d):
                cand = x - fx / d
                if lo < cand < hi:
                    x_new = cand
        if x_new is None:
            x_new = 0.5 * (lo + hi)
        elif abs(x_new - x) <= scale:
            return x_new
        x = x_new
    return x
