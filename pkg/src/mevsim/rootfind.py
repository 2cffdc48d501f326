"""Bracketed bisection.

Kept deliberately plain: every caller in this package has a residual that is
monotone on the bracket, so bisection's guarantees matter more than speed.
"""

import math

from .errors import BracketExhausted, ConvergenceFailure


def bisect(f, lo, hi, *, flo=None, fhi=None, rtol=1e-15, atol=0.0, maxiter=200):
    """Root of f on [lo, hi] given f(lo) and f(hi) of opposite sign.

    Returns the endpoint of the final bracket with the smaller |f|.
    An exact zero at either end is returned immediately.
    """
    flo = f(lo) if flo is None else flo
    fhi = f(hi) if fhi is None else fhi
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise ConvergenceFailure(f"no sign change on [{lo!r}, {hi!r}]")
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
        if hi - lo <= max(atol, rtol * max(abs(lo), abs(hi))):
            break
    return lo if abs(flo) <= abs(fhi) else hi


def expand_upper(f, lo, hi, cap, flo=None):
    """Double ``hi`` until f changes sign relative to f(lo).

    Returns (hi, f(hi)), or (lo, 0.0) when lo is already a root.  Raises BracketExhausted once hi would pass cap.
    """
    flo = f(lo) if flo is None else flo
    if flo == 0.0:
        return lo, flo
    fhi = f(hi)
    while (fhi > 0) == (flo > 0) and fhi != 0.0:
        if hi >= cap:
            raise BracketExhausted(f"no sign change below cap {cap!r}")
        hi = min(2.0 * hi, cap)
        fhi = f(hi)
        if not math.isfinite(fhi):
            raise BracketExhausted("residual left its domain during expansion")
    return hi, fhi
