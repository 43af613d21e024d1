"""Dense BFGS with a strong-Wolfe line search.

Used for the likelihood fine tuning and for the one-dimensional phase
refinement of the recursive reconstruction. The objective is a callable
returning ``(value, gradient)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass
class BFGSResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    iterations: int
    evaluations: int
    converged: bool
    reason: str
    trace: list = field(default_factory=list)


def _safe_eval(fun: Objective, x: np.ndarray):
    f, g = fun(x)
    f = float(f)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        return np.inf, g
    return f, g


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic interpolating values and slopes at ``a`` and ``b``."""
    try:
        d1 = da + db - 3.0 * (fa - fb) / (a - b)
        rad = d1 * d1 - da * db
        if rad < 0.0:
            return None
        d2 = np.copysign(np.sqrt(rad), b - a)
        denom = db - da + 2.0 * d2
        if denom == 0.0:
            return None
        t = b - (b - a) * (db + d2 - d1) / denom
    except (ZeroDivisionError, FloatingPointError):
        return None
    if not np.isfinite(t):
        return None
    return t


def strong_wolfe(fun: Objective, x, f0, g0, p, alpha1=1.0, c1=1e-4, c2=0.9,
                 max_iter=40, alpha_max=1e10):
    """Find a step along ``p`` meeting the strong Wolfe conditions.

    Bracketing phase followed by a cubic-interpolation zoom. Returns
    ``(alpha, f, g, n_evals)``; ``alpha`` is None when no step giving
    sufficient decrease was found. When the zoom runs out of budget the best
    sufficient-decrease step seen so far is returned, so the accepted value
    never exceeds ``f0``.
    """
    dphi0 = float(g0 @ p)
    n_evals = 0

    def phi(a):
        nonlocal n_evals
        n_evals += 1
        f, g = _safe_eval(fun, x + a * p)
        return f, g, (float(g @ p) if np.isfinite(f) else np.nan)

    def zoom(lo, f_lo, d_lo, g_lo, hi, f_hi, d_hi):
        for _ in range(max_iter):
            width = hi - lo
            t = None
            if np.isfinite(f_hi) and np.isfinite(d_hi):
                t = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
            lo_edge, hi_edge = sorted((lo + 0.1 * width, hi - 0.1 * width))
            if t is None or not lo_edge <= t <= hi_edge:
                t = lo + 0.5 * width
            f_t, g_t, d_t = phi(t)
            if f_t > f0 + c1 * t * dphi0 or f_t >= f_lo:
                hi, f_hi, d_hi = t, f_t, d_t
            else:
                if abs(d_t) <= -c2 * dphi0:
                    return t, f_t, g_t
                if d_t * (hi - lo) >= 0.0:
                    hi, f_hi, d_hi = lo, f_lo, d_lo
                lo, f_lo, d_lo, g_lo = t, f_t, d_t, g_t
            if abs(hi - lo) <= 1e-16 * max(1.0, abs(lo)):
                break
        if lo > 0.0:
            return lo, f_lo, g_lo
        return None, f0, g0

    a_prev, f_prev, d_prev, g_prev = 0.0, f0, dphi0, g0
    a = alpha1
    for i in range(max_iter):
        f_a, g_a, d_a = phi(a)
        if f_a > f0 + c1 * a * dphi0 or (i > 0 and f_a >= f_prev):
            res = zoom(a_prev, f_prev, d_prev, g_prev, a, f_a, d_a)
            return (*res, n_evals)
        if abs(d_a) <= -c2 * dphi0:
            return a, f_a, g_a, n_evals
        if d_a >= 0.0:
            res = zoom(a, f_a, d_a, g_a, a_prev, f_prev, d_prev)
            return (*res, n_evals)
        a_prev, f_prev, d_prev, g_prev = a, f_a, d_a, g_a
        if a >= alpha_max:
            break
        a = min(2.0 * a, alpha_max)
    if a_prev > 0.0:
        return a_prev, f_prev, g_prev, n_evals
    return None, f0, g0, n_evals


def bfgs(fun: Objective, x0, max_iter=10_000, step_tol=1e-12, c1=1e-4, c2=0.9,
         keep_trace=False) -> BFGSResult:
    """Minimize ``fun`` from ``x0`` with BFGS.

    Starts from the identity inverse Hessian, rescaled by ``s'y / y'y``
    after the first accepted step. Stops when an accepted step is shorter
    than ``step_tol``, when the gradient vanishes, when the line search can
    no longer decrease the objective, or after ``max_iter`` accepted
    iterations.
    """
    x = np.array(x0, dtype=float).reshape(-1)
    n = x.size
    f, g = _safe_eval(fun, x)
    if not np.isfinite(f):
        raise ValueError("objective is not finite at the starting point")
    evals = 1
    H = np.eye(n)
    trace = [f] if keep_trace else []
    first = True

    for it in range(max_iter):
        if not np.any(g):
            return BFGSResult(x, f, g, it, evals, True, "zero gradient", trace)
        p = -H @ g
        if not g @ p < 0.0:
            H = np.eye(n)
            p = -g
            first = True
        alpha1 = min(1.0, 1.0 / np.linalg.norm(g)) if first else 1.0
        alpha, f_new, g_new, ne = strong_wolfe(fun, x, f, g, p, alpha1, c1, c2)
        evals += ne
        if alpha is None:
            return BFGSResult(x, f, g, it, evals, True, "line search stalled", trace)
        s = alpha * p
        x_new = x + s
        y = g_new - g
        x, f, g = x_new, f_new, g_new
        if keep_trace:
            trace.append(f)
        if np.linalg.norm(s) < step_tol:
            return BFGSResult(x, f, g, it + 1, evals, True, "step below tolerance", trace)
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if first:
                H = np.eye(n) * (sy / float(y @ y))
                first = False
            rho = 1.0 / sy
            Hy = H @ y
            H += (rho * rho * (y @ Hy) + rho) * np.outer(s, s) - rho * (
                np.outer(Hy, s) + np.outer(s, Hy)
            )
    return BFGSResult(x, f, g, max_iter, evals, False, "iteration limit", trace)
