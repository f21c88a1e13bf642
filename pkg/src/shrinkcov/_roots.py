"""Bracketed scalar root solving for monotone equations.

Bisection narrows a guaranteed bracket, then safeguarded Newton polishes
the root until the equation residual itself (not the step size) meets the
requested tolerance.  Monotonicity of the callers' functions makes the
bracket argument sound.
"""

from __future__ import annotations

from typing import Callable

__all__ = ["solve_bracketed"]


def solve_bracketed(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    f_tol: float = 1e-13,
    df: Callable[[float], float] | None = None,
    max_bisect: int = 200,
    max_newton: int = 60,
) -> float:
    """Root of f on [lo, hi] with |f(root)| <= f_tol; f(lo), f(hi) must differ in sign."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0:
        raise ValueError(f"no sign change on bracket [{lo}, {hi}]")

    x, fx = lo, flo
    for _ in range(max_bisect):
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if abs(fmid) <= f_tol or mid == lo or mid == hi:
            x, fx = mid, fmid
            break
        if (fmid > 0) == (flo > 0):
            lo, flo = mid, fmid
        else:
            hi, fhi = mid, fmid
        x, fx = mid, fmid
        # leave the final digits to Newton once the bracket is tight
        if df is not None and hi - lo < 1e-6 * max(abs(lo), abs(hi), 1.0):
            break

    if df is not None:
        for _ in range(max_newton):
            if abs(fx) <= f_tol:
                break
            slope = df(x)
            if slope == 0.0:
                break
            step = fx / slope
            xn = x - step
            if not lo < xn < hi:  # fall back inside the bracket
                xn = 0.5 * (lo + hi)
            fxn = f(xn)
            if (fxn > 0) == (flo > 0):
                lo = xn
            else:
                hi = xn
            x, fx = xn, fxn

    return x
