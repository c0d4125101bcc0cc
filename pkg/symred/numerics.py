"""
Numerical kernels: adaptive Simpson quadrature, bracketed root finding,
RK45 integration of reduced ODEs and finite-difference checks of symbolic
derivatives.
"""
import math

import numpy
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .context import NumericsError, DomainError
from .expression import differentiate, evaluate, as_expr, Symbol
from .utils import logger

FD_STEP = 1e-5
ROOT_RESIDUAL = 1e-10


class QuadratureSpec:

    def __init__(self, integrand, lower, upper, tolerance=1e-10,
                 max_depth=50):
        if not tolerance > 0:
            raise ValueError('Tolerance must be positive (got %s)' % tolerance)
        if not (math.isfinite(lower) and math.isfinite(upper)):
            raise ValueError('Bounds must be finite (got %s, %s)' % (
                lower, upper))
        self.integrand = integrand
        self.lower = lower
        self.upper = upper
        self.tolerance = tolerance
        self.max_depth = max_depth


class RootBracket:

    def __init__(self, function, lo, hi, tolerance=1e-12):
        self.function = function
        self.lo = lo
        self.hi = hi
        self.tolerance = tolerance


def simpson(fa, fm, fb, h):
    return h / 3.0 * (fa + 4.0 * fm + fb)


def integrate_adaptive_simpson(f, a, b, tol=1e-10, max_depth=50):
    """
    Adaptive Simpson rule, returns (value, error estimate). Panels are
    split until the Richardson estimate drops below their share of the
    tolerance; a panel still too coarse at max_depth is an error.
    """
    if a == b:
        return 0.0, 0.0
    if a > b:
        value, error = integrate_adaptive_simpson(f, b, a, tol, max_depth)
        return -value, error

    def adaptive(a, b, fa, fm, fb, whole, depth, tol):
        m = (a + b) / 2.0
        h = (b - a) / 2.0
        lm = (a + m) / 2.0
        rm = (m + b) / 2.0
        flm = f(lm)
        frm = f(rm)
        left = simpson(fa, flm, fm, h / 2.0)
        right = simpson(fm, frm, fb, h / 2.0)
        combined = left + right
        error = (combined - whole) / 15.0
        if abs(error) < tol:
            return combined + error, abs(error)
        if depth >= max_depth:
            raise NumericsError(
                'max depth exceeded on [%r, %r] (error estimate %.3g)' % (
                    a, b, abs(error)))
        lval, lerr = adaptive(a, m, fa, flm, fm, left, depth + 1, tol / 2.0)
        rval, rerr = adaptive(m, b, fm, frm, fb, right, depth + 1, tol / 2.0)
        return lval + rval, lerr + rerr

    fa, fb = f(a), f(b)
    m = (a + b) / 2.0
    fm = f(m)
    whole = simpson(fa, fm, fb, (b - a) / 2.0)
    return adaptive(a, b, fa, fm, fb, whole, 0, tol)


def integrate(spec):
    return integrate_adaptive_simpson(
        spec.integrand, spec.lower, spec.upper, spec.tolerance,
        spec.max_depth)


def find_root(bracket):
    """
    Brent's method on a sign change. The root must also make f small:
    |f(root)| above the tolerance (scaled by the end values, never below
    ROOT_RESIDUAL) means the sign change was a pole or a jump.
    """
    f, lo, hi = bracket.function, bracket.lo, bracket.hi
    flo, fhi = f(lo), f(hi)
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    if flo * fhi > 0:
        raise NumericsError('no sign change on [%r, %r] (%r, %r)' % (
            lo, hi, flo, fhi))
    root = brentq(f, lo, hi, xtol=bracket.tolerance * 1e-3, maxiter=500)
    limit = max(bracket.tolerance, ROOT_RESIDUAL) * (
        1 + max(abs(flo), abs(fhi)))
    value = f(root)
    if not abs(value) <= limit:
        raise NumericsError('f(%r) = %r is not a root of [%r, %r]' % (
            root, value, lo, hi))
    return root


def expand_bracket(f, lo, hi, limit=60, factor=1.6):
    """
    Widen [lo, hi] geometrically until f changes sign.
    """
    flo, fhi = f(lo), f(hi)
    for _ in range(limit):
        if flo * fhi <= 0:
            return lo, hi
        width = hi - lo
        if abs(flo) < abs(fhi):
            lo -= factor * width
            flo = f(lo)
        else:
            hi += factor * width
            fhi = f(hi)
    raise NumericsError('no sign change found around [%r, %r]' % (lo, hi))


def solve_integral_equation(integrand, ref, target, lo, hi, tol=1e-12):
    """
    Find F with integral of integrand from ref to F equal to target.
    The integrand must keep one sign on [lo, hi], which makes the map
    monotone.
    """
    def gap(value):
        area, _ = integrate_adaptive_simpson(integrand, ref, value, tol)
        return area - target

    return find_root(RootBracket(gap, lo, hi, tol))


class ODETable:
    "Dense solution of an initial value problem"

    def __init__(self, result):
        self.t = result.t
        self.y = result.y
        self.sol = result.sol
        self.nfev = result.nfev

    def at(self, t):
        return self.sol(t)

    def rows(self):
        for i, t in enumerate(self.t):
            yield (t,) + tuple(self.y[:, i])


def integrate_ode(rhs, y0, t_span, tolerance=1e-8, t_eval=None):
    # Local tolerances are set below the requested global error
    local = tolerance * 1e-2
    result = solve_ivp(
        rhs, t_span, numpy.atleast_1d(numpy.asarray(y0, dtype=float)),
        method='RK45', rtol=local, atol=local, t_eval=t_eval,
        dense_output=True,
    )
    if not result.success:
        t_fail = result.t[-1] if len(result.t) else t_span[0]
        raise NumericsError('step underflow near t=%r: %s' % (
            t_fail, result.message))
    logger.debug('RK45 on %s: %s steps, %s evaluations', t_span,
                 len(result.t), result.nfev)
    return ODETable(result)


def fd_check(e, var, env, h=FD_STEP, signs=None):
    """
    Relative gap between the symbolic derivative of e and a central
    difference with step h.
    """
    e = as_expr(e)
    name = var.name if isinstance(var, Symbol) else var
    symbolic = evaluate(differentiate(e, name, signs=signs), env)
    x = env.value(name)
    try:
        up = evaluate(e, env.bind({name: x + h}))
        down = evaluate(e, env.bind({name: x - h}))
    except DomainError as exc:
        raise DomainError('stencil [%r, %r] leaves the domain: %s' % (
            x - h, x + h, exc))
    central = (up - down) / (2 * h)
    return abs(central - symbolic) / (1 + abs(symbolic))
