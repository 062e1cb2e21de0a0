"""Scalar bracketing root-finder (Chandrupatla's method).

The method keeps a sign-changing bracket like bisection but proposes inverse
quadratic interpolation points whenever the three retained points make the
interpolant trustworthy, giving superlinear convergence on smooth functions
while never leaving the bracket.  The acceptance test pits it against plain
bisection: same root within tolerance, fewer function evaluations.
"""

from __future__ import annotations

import numpy as np

_EPS = float(np.finfo(np.float64).eps)


class NoBracketError(ValueError):
    """f has the same sign at both ends of the interval."""


def find_root_with_stats(f, lo: float, hi: float, tol: float = 1e-6,
                         max_iters: int = 100, f_lo: float | None = None,
                         f_hi: float | None = None) -> tuple[float, int]:
    """Root of f on [lo, hi] plus the number of f evaluations used.

    Requires sign(f(lo)) != sign(f(hi)).  Stops when the bracket is narrower
    than ``tol`` (plus a floating-point floor) or after ``max_iters``
    proposals.  Pass ``f_lo``/``f_hi`` when the endpoint values are already
    known; they then do not count as new evaluations.
    """
    evals = 0
    if f_lo is None:
        f_lo = f(lo)
        evals += 1
    if f_hi is None:
        f_hi = f(hi)
        evals += 1
    if f_lo == 0.0:
        return float(lo), evals
    if f_hi == 0.0:
        return float(hi), evals
    if np.sign(f_lo) == np.sign(f_hi):
        raise NoBracketError(f"f({lo})={f_lo} and f({hi})={f_hi} have the same sign")

    # a is the most recent point, b the opposite-signed partner, c the
    # previous point on a's side
    b, fb = lo, f_lo
    a, fa = hi, f_hi
    c, fc = hi, f_hi
    t = 0.5
    for _ in range(max_iters):
        xt = a + t * (b - a)
        ft = f(xt)
        evals += 1
        if ft == 0.0:
            return float(xt), evals
        if np.sign(ft) == np.sign(fa):
            c, fc = a, fa
        else:
            c, fc = b, fb
            b, fb = a, fa
        a, fa = xt, ft
        if abs(fa) < abs(fb):
            xm, fm = a, fa
        else:
            xm, fm = b, fb
        tol_k = 2.0 * _EPS * abs(xm) + 0.5 * tol
        tlim = tol_k / abs(b - c)
        if tlim > 0.5:
            return float(xm), evals
        # accept inverse quadratic interpolation only when the points are
        # suitably shaped, otherwise bisect
        xi = (a - b) / (c - b)
        phi = (fa - fb) / (fc - fb)
        if phi * phi < xi and (1.0 - phi) * (1.0 - phi) < 1.0 - xi:
            x_star = (
                a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
            )
            t = (x_star - a) / (b - a)
        else:
            t = 0.5
        t = min(max(t, tlim), 1.0 - tlim)
    return float(xm), evals


def find_root(f, lo: float, hi: float, tol: float = 1e-6, max_iters: int = 100) -> float:
    root, _ = find_root_with_stats(f, lo, hi, tol=tol, max_iters=max_iters)
    return root
