"""
Wave equation with small dissipation

    u_tt = [f(u) u_x]_x + eps [lambda(u) u_t]_xx

split into its order-0 and order-1 parts in eps (u = u0 + eps u1), and
its potential form for the cases admitting a sixth generator.
"""
from collections import OrderedDict
import re

import numpy

from .context import (ConstraintError, DomainError, SymredError,
                      log_residual, setting)
from .expression import (Add, Call, Env, FuncApp, Mul, Number, Pow, Symbol,
                         ZERO, add, as_expr, call, differentiate, equivalent,
                         evaluate, mul, neg, parse, power, simplify,
                         substitute)
from .utils import logger

FIELDS = ('u0', 'u1', 'v0', 'v1')
JET_RE = re.compile(r'^([uv][01])_(t*)(x*)$')
EPS = 'eps'
SAMPLE_DOMAIN = {'t': (0.5, 2.0), 'x': (0.5, 2.0)}
# Sampling intervals for symbolic identities on jet symbols
JET_DOMAIN = {
    'f0': (0.5, 2.0), 'lambda0': (0.5, 2.0), 'p': (0.5, 2.0),
    'q': (-0.4, 0.4), 's': (-1.0, 1.0), 'u0': (0.5, 2.0),
}
JET_RANGE = (-1.0, 1.0)


def jet(name, dt=0, dx=0):
    "Jet symbol of a field: jet('u0', 1, 2) is u0_txx"
    if name not in FIELDS:
        raise SymredError('Unknown field "%s"' % name)
    if dt < 0 or dx < 0:
        raise ValueError('Negative derivative order (%s, %s)' % (dt, dx))
    if not (dt or dx):
        return Symbol(name)
    return Symbol('%s_%s%s' % (name, 't' * dt, 'x' * dx))


def jet_parts(symbol):
    name = symbol.name if isinstance(symbol, Symbol) else symbol
    if name in FIELDS:
        return name, 0, 0
    m = JET_RE.match(name)
    if m is None:
        return None
    return m.group(1), len(m.group(2)), len(m.group(3))


def jet_domain(e):
    domain = dict(JET_DOMAIN)
    for name in as_expr(e).free_symbols():
        if name not in domain:
            domain[name] = JET_RANGE
    return domain


class CaseSpec:

    def __init__(self, case_id, f, lam, params, fixed=None, potential=None):
        self.id = case_id
        self.f = parse(f)
        self.lam = parse(lam)
        self.params = tuple(params)
        self.fixed = fixed or {}
        # antiderivative of f, for the potential system
        self.potential = parse(potential) if potential else None
        allowed = set(self.params) | {'u0'}
        for e in (self.f, self.lam):
            extra = e.free_symbols() - allowed
            if extra:
                raise SymredError('Case %s: undeclared symbol(s) %s' % (
                    case_id, ', '.join(sorted(extra))))

    def f_of(self, u):
        return substitute(self.f, {'u0': u})

    def lam_of(self, u):
        return substitute(self.lam, {'u0': u})

    def check(self, values):
        if 'p' in self.params and values.get('p') == 0:
            raise ConstraintError('Case %s requires p != 0' % self.id)
        for name, value in self.fixed.items():
            if name in values and values[name] != value:
                raise ConstraintError('Case %s fixes %s=%s' % (
                    self.id, name, value))
        missing = set(self.params) - set(values)
        if missing:
            raise ConstraintError('Case %s: missing value for %s' % (
                self.id, ', '.join(sorted(missing))))
        return values

    def __repr__(self):
        return '<CaseSpec %s f=%s lambda=%s>' % (self.id, self.f, self.lam)


CASE_SPECS = OrderedDict((spec.id, spec) for spec in [
    CaseSpec('I', 'f0*exp(u0/p)', 'lambda0*exp((1+s)*u0/p)',
             ('f0', 'lambda0', 'p', 's')),
    CaseSpec('II', 'f0*(u0+q)^(1/p)', 'lambda0*(u0+q)^((1+s)/p-1)',
             ('f0', 'lambda0', 'p', 'q', 's')),
    # p = s = -3/4 in case II
    CaseSpec('III', 'f0*(u0+q)^(-4/3)', 'lambda0*(u0+q)^(-4/3)',
             ('f0', 'lambda0', 'q'), fixed={'p': -0.75, 's': -0.75}),
    CaseSpec('IV', 'f0*exp(u0/p)', 'lambda0*exp((1+s)*u0/p)',
             ('f0', 'lambda0', 'p', 's'), potential='p*f0*exp(u0/p)'),
    CaseSpec('V', 'f0*(u0+q)^(1/p)', 'lambda0*(u0+q)^((1+s)/p-1)',
             ('f0', 'lambda0', 'p', 'q', 's'),
             potential='f0*p/(p+1)*(u0+q)^((p+1)/p)'),
])


def get_spec(case_id):
    try:
        return CASE_SPECS[str(case_id).upper()]
    except KeyError:
        raise SymredError('Unknown case "%s"' % case_id)


class PDESystemPair:

    def __init__(self, case, residuals):
        self.case = case
        self.residuals = OrderedDict(residuals)

    @property
    def E0(self):
        return self.residuals['E0']

    @property
    def E1(self):
        return self.residuals['E1']

    def __getitem__(self, name):
        return self.residuals[name]

    def __iter__(self):
        return iter(self.residuals.items())

    def __repr__(self):
        return '<PDESystemPair %s %s>' % (
            self.case.id, ', '.join(self.residuals))


def field_func(name):
    return FuncApp(name.upper(), (Symbol('t'), Symbol('x')))


def to_jets(e):
    "Replace U0(t, x) and its derivatives by jet symbols"
    memo = {}

    def walk(node):
        if node in memo:
            return memo[node]
        if isinstance(node, (Number, Symbol)):
            res = node
        elif type(node) is Add:
            res = add(*map(walk, node.args))
        elif type(node) is Mul:
            res = mul(*map(walk, node.args))
        elif isinstance(node, Pow):
            res = power(walk(node.base), walk(node.exp))
        elif isinstance(node, Call):
            res = call(node.name, walk(node.arg))
        elif node.name.lower() in FIELDS:
            res = jet(node.name.lower(), *node.orders)
        else:
            res = node
        memo[node] = res
        return res

    return walk(as_expr(e))


def dn(e, var, n=1):
    for _ in range(n):
        e = differentiate(e, var)
    return e


def order_coefficients(e):
    "Coefficients of eps^0 and eps^1"
    e0 = simplify(substitute(e, {EPS: ZERO}))
    e1 = simplify(substitute(differentiate(e, EPS), {EPS: ZERO}))
    return to_jets(e0), to_jets(e1)


def full_residual(case, u):
    """
    u_tt - [f(u) u_x]_x - eps [lambda(u) u_t]_xx for an expression u of
    t, x (and eps).
    """
    case = get_spec(case) if isinstance(case, str) else case
    u = as_expr(u)
    flux = mul(case.f_of(u), dn(u, 'x'))
    dissipation = mul(case.lam_of(u), dn(u, 't'))
    return add(
        dn(u, 't', 2),
        neg(dn(flux, 'x')),
        neg(mul(Symbol(EPS), dn(dissipation, 'x', 2))),
    )


def order_split(case):
    case = get_spec(case) if isinstance(case, str) else case
    u = add(field_func('u0'), mul(Symbol(EPS), field_func('u1')))
    E0, E1 = order_coefficients(full_residual(case, u))
    logger.debug('Order split of case %s: %s terms at order 1', case.id,
                 len(E1.args) if type(E1) is Add else 1)
    return PDESystemPair(case, [('E0', E0), ('E1', E1)])


def potential_split(case):
    case = get_spec(case) if isinstance(case, str) else case
    if case.potential is None:
        raise SymredError('Case %s has no potential form' % case.id)
    eps = Symbol(EPS)
    u = add(field_func('u0'), mul(eps, field_func('u1')))
    v = add(field_func('v0'), mul(eps, field_func('v1')))
    first = add(dn(u, 't'), neg(dn(v, 'x')))
    flux = add(substitute(case.potential, {'u0': u}),
               mul(eps, case.lam_of(u), dn(v, 'x')))
    second = add(dn(v, 't'), neg(dn(flux, 'x')))
    P0a, P1a = order_coefficients(first)
    P0b, P1b = order_coefficients(second)
    return PDESystemPair(case, [
        ('P0a', P0a), ('P0b', P0b), ('P1a', P1a), ('P1b', P1b)])


def total_derivative(e, var):
    "Total derivative of a jet expression along t or x"
    e = as_expr(e)
    res = differentiate(e, var)
    for name in sorted(e.free_symbols()):
        parts = jet_parts(name)
        if parts is None:
            continue
        field, dt, dx = parts
        following = jet(field, dt + (var == 't'), dx + (var == 'x'))
        res = add(res, mul(differentiate(e, name), following))
    return simplify(res)


def eliminate_potential(e):
    "Rewrite v0_x... jets with u0_t... (uses u0_t = v0_x)"
    bindings = {}
    for name in as_expr(e).free_symbols():
        parts = jet_parts(name)
        if parts and parts[0] == 'v0' and parts[2] > 0:
            _, dt, dx = parts
            bindings[name] = jet('u0', dt + 1, dx - 1)
    return simplify(substitute(e, bindings))


def compatibility(pair):
    """
    Cross-differentiation of the potential system: returns the
    expressions to compare with E0 and E1 of the order split.
    """
    c0 = add(total_derivative(pair['P0a'], 't'),
             total_derivative(pair['P0b'], 'x'))
    c1 = add(total_derivative(pair['P1a'], 't'),
             total_derivative(pair['P1b'], 'x'))
    return eliminate_potential(c0), eliminate_potential(c1)


# Hand-encoded forms

GENERIC_PRINTED = (
    'u0_tt - f*u0_xx - df*u0_x^2',
    'u1_tt - f*u1_xx - df*u0_xx*u1 - 2*df*u0_x*u1_x - d2f*u0_x^2*u1'
    ' - d2l*u0_x^2*u0_t - dl*u0_xx*u0_t - 2*dl*u0_x*u0_tx - l*u0_txx',
)

PRINTED = {
    'I': (
        'u0_tt - f0*exp(u0/p)*u0_xx - f0/p*exp(u0/p)*u0_x^2',
        'u1_tt - f0*exp(u0/p)*u1_xx - f0/p*exp(u0/p)*u0_xx*u1'
        ' - 2*f0/p*exp(u0/p)*u0_x*u1_x - f0/p^2*exp(u0/p)*u0_x^2*u1'
        ' - lambda0*((1+s)/p)^2*exp((1+s)/p*u0)*u0_x^2*u0_t'
        ' - lambda0*((1+s)/p)*exp((1+s)/p*u0)*u0_xx*u0_t'
        ' - 2*lambda0*((1+s)/p)*exp((1+s)/p*u0)*u0_x*u0_tx'
        ' - lambda0*exp((1+s)/p*u0)*u0_txx',
    ),
    'II': (
        'u0_tt - f0*(u0+q)^(1/p)*u0_xx - f0/p*(u0+q)^(1/p-1)*u0_x^2',
        'u1_tt - f0*(u0+q)^(1/p)*u1_xx - f0/p*(u0+q)^(1/p-1)*u0_xx*u1'
        ' - 2*f0/p*(u0+q)^(1/p-1)*u0_x*u1_x'
        ' - f0/p*(1/p-1)*(u0+q)^(1/p-2)*u0_x^2*u1'
        ' - lambda0*((1+s)/p-1)*((1+s)/p-2)*(u0+q)^((1+s)/p-3)*u0_x^2*u0_t'
        ' - lambda0*((1+s)/p-1)*(u0+q)^((1+s)/p-2)*u0_xx*u0_t'
        ' - 2*lambda0*((1+s)/p-1)*(u0+q)^((1+s)/p-2)*u0_x*u0_tx'
        ' - lambda0*(u0+q)^((1+s)/p-1)*u0_txx',
    ),
    'III': (
        'u0_tt - f0*(u0+q)^(-4/3)*u0_xx + 4/3*f0*(u0+q)^(-7/3)*u0_x^2',
        'u1_tt - f0*(u0+q)^(-4/3)*u1_xx + 4/3*f0*(u0+q)^(-7/3)*u0_xx*u1'
        ' + 8/3*f0*(u0+q)^(-7/3)*u0_x*u1_x'
        ' - 28/9*f0*(u0+q)^(-10/3)*u0_x^2*u1'
        ' - 28/9*lambda0*(u0+q)^(-10/3)*u0_x^2*u0_t'
        ' + 4/3*lambda0*(u0+q)^(-7/3)*u0_xx*u0_t'
        ' + 8/3*lambda0*(u0+q)^(-7/3)*u0_x*u0_tx'
        ' - lambda0*(u0+q)^(-4/3)*u0_txx',
    ),
}


def printed_pair(case_id):
    case = get_spec(case_id)
    if case.id not in PRINTED:
        raise SymredError('No printed pair for case %s' % case.id)
    E0, E1 = (parse(text) for text in PRINTED[case.id])
    return PDESystemPair(case, [('E0', E0), ('E1', E1)])


def generic_pair(case):
    "Order-0/1 pair written with f, lambda and their derivatives"
    case = get_spec(case) if isinstance(case, str) else case
    u0 = 'u0'
    bindings = {
        'f': case.f, 'df': differentiate(case.f, u0),
        'd2f': dn(case.f, u0, 2),
        'l': case.lam, 'dl': differentiate(case.lam, u0),
        'd2l': dn(case.lam, u0, 2),
    }
    E0, E1 = (substitute(parse(t), bindings) for t in GENERIC_PRINTED)
    return PDESystemPair(case, [('E0', E0), ('E1', E1)])


def compare_pairs(machine, printed, trials=30, rng=None):
    """
    Check both residuals agree, logs the printed form when it does not
    """
    res = OrderedDict()
    for name, e in machine:
        other = printed[name]
        domain = jet_domain(add(e, other))
        ok = equivalent(e, other, domain=domain, trials=trials, rng=rng)
        if not ok:
            log_residual('Printed %s of case %s differs' % (
                name, machine.case.id), other, exception=True)
        res[name] = ok
    return res


# Residuals of candidate fields


class ResidualReport:

    def __init__(self, names):
        self.max_abs = OrderedDict((n, 0.0) for n in names)
        self.max_rel = OrderedDict((n, 0.0) for n in names)
        self.samples = 0
        self.failures = 0

    def update(self, name, value, scale):
        value = abs(value)
        self.max_abs[name] = max(self.max_abs[name], value)
        self.max_rel[name] = max(self.max_rel[name], value / (1 + scale))

    def ok(self, tolerance=None):
        tolerance = setting('tolerance', tolerance)
        return all(v <= tolerance for v in self.max_rel.values())

    def worst(self):
        return max(self.max_rel.values()) if self.max_rel else 0.0

    def as_dict(self):
        return OrderedDict([
            ('max_abs', dict(self.max_abs)),
            ('max_rel', dict(self.max_rel)),
            ('samples', self.samples),
            ('failures', self.failures),
        ])

    def __repr__(self):
        return '<ResidualReport worst=%.3g samples=%s>' % (
            self.worst(), self.samples)


def jet_bindings(exprs, fields):
    """
    Map every jet symbol found in exprs to the matching derivative of
    the field expressions.
    """
    fields = dict((k, as_expr(v)) for k, v in fields.items())
    bindings = {}
    for e in exprs:
        for name in e.free_symbols():
            parts = jet_parts(name)
            if parts is None:
                continue
            field, dt, dx = parts
            if field not in fields:
                raise SymredError('No expression given for field %s' % field)
            bindings[name] = dn(dn(fields[field], 't', dt), 'x', dx)
    return bindings


def scale_of(e, env):
    if type(e) is Add:
        return sum(abs(evaluate(a, env)) for a in e.args)
    return abs(evaluate(e, env))


def residual(pair, fields, samples=None, domain=None, rng=None, env=None,
             max_retries=None):
    """
    Substitute the fields into every residual of pair and evaluate them
    at random (t, x) points.
    """
    samples = setting('samples', samples)
    rng = rng or numpy.random.default_rng(setting('seed'))
    env = env or Env()
    domain = dict(SAMPLE_DOMAIN, **(domain or {}))
    bindings = jet_bindings([e for _, e in pair], fields)
    exprs = OrderedDict(
        (name, simplify(substitute(e, bindings))) for name, e in pair)
    report = ResidualReport(exprs)
    max_retries = max_retries or 10 * samples
    names = sorted(set(domain) - set(env.values))
    while report.samples < samples:
        point = env.bind(dict(
            (n, float(rng.uniform(*domain[n]))) for n in names))
        try:
            values = [(n, evaluate(e, point), scale_of(e, point))
                      for n, e in exprs.items()]
        except DomainError as exc:
            report.failures += 1
            if report.failures > max_retries:
                raise DomainError(
                    'sampling exhausted after %s domain violations (%s)' % (
                        report.failures, exc))
            continue
        for name, value, scale in values:
            report.update(name, value, scale)
        report.samples += 1
    return report
