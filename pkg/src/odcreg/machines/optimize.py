"""Limited-memory BFGS with a cubic-interpolation strong Wolfe line search.

The objectives minimised here (TGP and its weighted variant) are only
piecewise smooth: the unsquared-norm output kernel has a kink at every
training output.  The line search therefore accepts the best sufficient-
decrease point once its bracket collapses instead of failing, and the
outer loop stops when steps become negligible.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["MinimizeResult", "minimize_lbfgs", "wolfe_line_search", "cubic_minimizer"]


@dataclass
class MinimizeResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    nit: int
    nfev: int
    converged: bool
    degenerate: bool
    message: str


def cubic_minimizer(a, fa, ga, b, fb, gb):
    """Minimiser of the cubic interpolating value and slope at ``a`` and ``b``.

    Returns ``None`` when the interpolant has no real minimiser.
    """
    if a == b:
        return None
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if not np.isfinite(disc) or disc < 0:
        return None
    d2 = np.copysign(np.sqrt(disc), b - a)
    denom = gb - ga + 2.0 * d2
    if denom == 0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    return t if np.isfinite(t) else None


def _zoom(phi, phi0, dphi0, lo, hi, c1, c2, max_iter):
    # lo/hi are (alpha, value, slope, grad); lo always satisfies sufficient decrease
    nfev = 0
    for _ in range(max_iter):
        a_lo, f_lo, g_lo, _ = lo
        a_hi, f_hi, g_hi, _ = hi
        width = abs(a_hi - a_lo)
        if width <= 1e-14 * max(1.0, abs(a_lo)):
            break
        trial = None
        if np.isfinite(f_hi) and np.isfinite(g_hi):
            trial = cubic_minimizer(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        left, right = min(a_lo, a_hi), max(a_lo, a_hi)
        margin = 0.1 * width
        if trial is None or not (left + margin <= trial <= right - margin):
            trial = 0.5 * (a_lo + a_hi)
        f_t, g_t, grad_t = phi(trial)
        nfev += 1
        if not np.isfinite(f_t) or f_t > phi0 + c1 * trial * dphi0 or f_t >= f_lo:
            hi = (trial, f_t, g_t, grad_t)
            continue
        if abs(g_t) <= -c2 * dphi0:
            return (trial, f_t, g_t, grad_t), nfev, True
        if g_t * (a_hi - a_lo) >= 0:
            hi = lo
        lo = (trial, f_t, g_t, grad_t)
    if lo[0] > 0:
        return lo, nfev, False
    return None, nfev, False


def wolfe_line_search(phi, phi0, dphi0, grad0, alpha1=1.0, c1=1e-4, c2=0.9,
                      max_iter=30, alpha_max=1e12):
    """Strong Wolfe line search along a descent direction.

    ``phi(alpha)`` returns ``(value, slope, gradient)``; non-finite values
    are treated as failing sufficient decrease.

    Returns
    -------
    step : tuple or None
        ``(alpha, value, slope, gradient)`` of the accepted point.
    nfev : int
    wolfe : bool
        Whether the curvature condition holds at the accepted point.
    """
    prev = (0.0, phi0, dphi0, grad0)
    alpha = alpha1
    nfev = 0
    for i in range(max_iter):
        f_a, g_a, grad_a = phi(alpha)
        nfev += 1
        cur = (alpha, f_a, g_a, grad_a)
        if not np.isfinite(f_a) or f_a > phi0 + c1 * alpha * dphi0 or (i > 0 and f_a >= prev[1]):
            step, n, ok = _zoom(phi, phi0, dphi0, prev, cur, c1, c2, max_iter)
            return step, nfev + n, ok
        if abs(g_a) <= -c2 * dphi0:
            return cur, nfev, True
        if g_a >= 0:
            step, n, ok = _zoom(phi, phi0, dphi0, cur, prev, c1, c2, max_iter)
            return step, nfev + n, ok
        prev = cur
        if alpha >= alpha_max:
            break
        alpha = min(4.0 * alpha, alpha_max)
    return prev if prev[0] > 0 else None, nfev, False


def _two_loop(g, S, Y, rho, gamma):
    q = g.copy()
    alphas = []
    for s, y, r in zip(reversed(S), reversed(Y), reversed(rho)):
        a = r * (s @ q)
        alphas.append(a)
        q -= a * y
    q *= gamma
    for (s, y, r), a in zip(zip(S, Y, rho), reversed(alphas)):
        b = r * (y @ q)
        q += (a - b) * s
    return q


def _along(fun, x, direction):
    def phi(alpha):
        fa, ga = fun(x + alpha * direction)
        return fa, float(ga @ direction), ga

    return phi


def minimize_lbfgs(fun, x0, max_iter=100, gtol=1e-6, xtol=1e-10, ftol=1e-14,
                   memory=10, c1=1e-4, c2=0.9):
    """Minimise ``fun(x) -> (value, gradient)`` from ``x0``.

    Stops when the gradient infinity norm drops below ``gtol``, when a step
    or the relative decrease becomes negligible, or after ``max_iter``
    iterations.  If no step can be accepted from ``x0`` the result carries
    ``degenerate=True`` and ``x == x0``.
    """
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    nfev = 1
    if not np.isfinite(f):
        return MinimizeResult(x, f, g, 0, nfev, False, True, "objective not finite at start")
    S, Y, rho = [], [], []
    gamma = 1.0
    message = "iteration limit reached"
    converged = False
    degenerate = False
    nit = 0
    for nit in range(1, max_iter + 1):
        gnorm = np.max(np.abs(g)) if g.size else 0.0
        if gnorm < gtol:
            converged, message, nit = True, "gradient tolerance reached", nit - 1
            break
        direction = -_two_loop(g, S, Y, rho, gamma) if S else -g
        slope = float(g @ direction)
        if not slope < 0:
            S, Y, rho = [], [], []
            direction, slope = -g, float(-(g @ g))
        alpha1 = 1.0 if S else min(1.0, 1.0 / np.linalg.norm(g))
        step, n, _ = wolfe_line_search(_along(fun, x, direction), f, slope, g, alpha1, c1, c2)
        nfev += n
        if step is None and S:
            # retry along steepest descent before giving up
            S, Y, rho = [], [], []
            direction = -g
            slope = float(-(g @ g))
            alpha1 = min(1.0, 1.0 / np.linalg.norm(g))
            step, n, _ = wolfe_line_search(_along(fun, x, direction), f, slope, g, alpha1, c1, c2)
            nfev += n
        if step is None:
            if nit == 1:
                degenerate = True
                message = "no acceptable step from the initial point"
            else:
                converged = True
                message = "no further decrease possible"
            nit -= 1
            break
        alpha, f_new, _, g_new = step
        s = alpha * direction
        y = g_new - g
        x = x + s
        f_old, f, g = f, f_new, g_new
        sy = float(s @ y)
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            S.append(s)
            Y.append(y)
            rho.append(1.0 / sy)
            gamma = sy / float(y @ y)
            if len(S) > memory:
                S.pop(0)
                Y.pop(0)
                rho.pop(0)
        if np.linalg.norm(s) <= xtol * (1.0 + np.linalg.norm(x)):
            converged, message = True, "step tolerance reached"
            break
        if f_old - f <= ftol * max(1.0, abs(f_old)):
            converged, message = True, "relative decrease below tolerance"
            break
    return MinimizeResult(x, f, g, nit, nfev, converged, degenerate, message)
