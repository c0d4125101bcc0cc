from collections import OrderedDict

import numpy

from .context import (DomainError, NumericsError, SymredError, log_residual,
                      setting)
from .expression import (Add, Call, Env, Mul, Number, Pow, Symbol, add,
                         as_expr, call, differentiate, equivalent,
                         evaluate, functions, mul, parse, power, simplify,
                         substitute)
from .liealg import get_case, CHART_DOMAIN
from .models import jet_bindings
from .numerics import RootBracket, expand_bracket, find_root
from .utils import logger

XI = 'xi'
CHART_RANGE = (0.5, 2.0)
STANDIN_RANGE = {0: (0.5, 1.5), 1: (-1.0, 1.0), 2: (-1.0, 1.0),
                 3: (-1.0, 1.0)}


def standin(name, order):
    "Symbol standing for the order-th derivative of F: F, F_xi, F_xixi"
    if not order:
        return Symbol(name)
    return Symbol('%s_%s' % (name, XI * order))


class ReductionAnsatz:

    def __init__(self, entry_id, case_id, xi, forms, element=None,
                 factors=None, invariants=None, odes=None, domain=None,
                 values=None, shell=None):
        self.entry_id = entry_id
        self.case_id = case_id
        self.xi = parse(xi) if isinstance(xi, str) else as_expr(xi)
        self.forms = OrderedDict(
            (name, substitute(parse(text), {XI: self.xi}))
            for name, text in forms.items()
        )
        self.functions = sorted(set().union(*(
            functions(f) for f in self.forms.values())))
        self.element = element
        self.factors = dict(
            (k, parse(v)) for k, v in (factors or {}).items())
        self.invariants = [parse(i) for i in (invariants or [])]
        self.odes = OrderedDict(
            (k, parse(v)) for k, v in (odes or {}).items())
        self.domain = dict(
            (k, tuple(v)) for k, v in (domain or {}).items())
        self.values = dict(values or {})
        # stand-ins replaced on both sides before comparing, e.g. a first
        # integral F_xi = sqrt(...)
        self.shell = dict(
            (k, parse(v)) for k, v in (shell or {}).items())

    def chart_domain(self):
        res = {'t': CHART_RANGE, 'x': CHART_RANGE}
        res.update((k, v) for k, v in self.domain.items()
                   if k in ('t', 'x'))
        return res

    def __repr__(self):
        return '<ReductionAnsatz %s xi=%s>' % (self.entry_id, self.xi)


def to_standins(e, names):
    "Replace F(xi(t, x)) and its derivatives by stand-in symbols"
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
        elif node.name in names and len(node.args) == 1:
            res = standin(node.name, node.orders[0])
        else:
            raise SymredError('Unexpected function %s in reduction' % node)
        memo[node] = res
        return res

    return walk(as_expr(e))


def apply_ansatz(pair, ansatz):
    """
    Substitute the ansatz into every residual of pair, unknown functions
    are left as stand-in symbols (F, F_xi, ...).
    """
    bindings = jet_bindings([e for _, e in pair], ansatz.forms)
    res = []
    for name, e in pair:
        reduced = simplify(substitute(e, bindings))
        res.append(to_standins(reduced, ansatz.functions))
    logger.debug('Ansatz %s applied to case %s', ansatz.entry_id,
                 pair.case.id)
    return tuple(res)


class XiReport:

    def __init__(self):
        self.pairs = 0
        self.max_gap = 0.0
        self.failures = 0
        self.ok = True

    def __bool__(self):
        return self.ok

    def as_dict(self):
        return OrderedDict([
            ('ok', self.ok), ('pairs', self.pairs),
            ('max_gap', self.max_gap), ('failures', self.failures),
        ])

    def __repr__(self):
        return '<XiReport ok=%s pairs=%s gap=%.3g>' % (
            self.ok, self.pairs, self.max_gap)


def matched_point(xi, env, t1, x1, rng, attempts=20, chart=None):
    """
    Second chart point sharing the value of xi with (t1, x1): t moves,
    x is solved for. A xi free of x (or of t) only redraws the other
    coordinate inside the chart.
    """
    chart = chart or {'t': CHART_RANGE, 'x': CHART_RANGE}
    if not xi.has('x'):
        return t1, float(rng.uniform(*chart['x']))
    if not xi.has('t'):
        return float(rng.uniform(*chart['t'])), x1
    target = evaluate(xi, env.bind({'t': t1, 'x': x1}))
    for _ in range(attempts):
        t2 = t1 * float(rng.uniform(0.6, 1.6))

        def gap(x):
            return evaluate(xi, env.bind({'t': t2, 'x': x})) - target

        try:
            lo, hi = expand_bracket(gap, x1 * 0.9, x1 * 1.1, limit=20)
            x2 = find_root(RootBracket(gap, lo, hi, 1e-14))
        except (DomainError, NumericsError):
            continue
        if x2 > 0 and abs(x2 - x1) > 1e-6:
            return t2, x2
    raise NumericsError('No point sharing xi=%r with (%r, %r)' % (
        target, t1, x1))


def check_xi_only(R, ansatz, samples=None, factor=None, rng=None,
                  env=None, tolerance=1e-9):
    """
    Evaluate R / factor at pairs of chart points sharing the same xi,
    stand-ins bound to the same random values inside a pair.
    """
    samples = setting('xi_pairs', samples)
    rng = rng or numpy.random.default_rng(setting('seed'))
    env = env or Env(ansatz.values)
    R = as_expr(R)
    if factor is not None:
        R = mul(R, power(as_expr(factor), -1))
    names = [n for n in R.free_symbols()
             if n not in ('t', 'x') and n not in env.values]
    chart = ansatz.chart_domain()
    report = XiReport()
    while report.pairs < samples:
        t1 = float(rng.uniform(*chart['t']))
        x1 = float(rng.uniform(*chart['x']))
        values = {}
        for name in sorted(names):
            order = name.count(XI) if '_' in name else 0
            lo, hi = ansatz.domain.get(name) or STANDIN_RANGE.get(
                order, (-1.0, 1.0))
            values[name] = float(rng.uniform(lo, hi))
        point = env.bind(values)
        try:
            t2, x2 = matched_point(ansatz.xi, point, t1, x1, rng,
                                   chart=chart)
            if factor is not None:
                for t, x in ((t1, x1), (t2, x2)):
                    if evaluate(factor, point.bind({'t': t, 'x': x})) == 0:
                        raise DomainError('normalization factor vanishes',
                                          str(factor))
            v1 = evaluate(R, point.bind({'t': t1, 'x': x1}))
            v2 = evaluate(R, point.bind({'t': t2, 'x': x2}))
        except (DomainError, NumericsError) as exc:
            report.failures += 1
            if report.failures > 10 * samples:
                raise DomainError('sampling exhausted (%s)' % exc)
            continue
        gap = abs(v1 - v2) / (1 + max(abs(v1), abs(v2)))
        report.max_gap = max(report.max_gap, gap)
        report.pairs += 1
    report.ok = report.max_gap <= tolerance
    return report


def standin_domain(e, ansatz):
    domain = dict(ansatz.chart_domain())
    for name in as_expr(e).free_symbols():
        if name in domain or name in ansatz.values:
            continue
        if name in ansatz.domain:
            domain[name] = ansatz.domain[name]
            continue
        order = name.count(XI) if '_' in name else 0
        domain[name] = STANDIN_RANGE.get(order, (-1.0, 1.0))
    return domain


def match_reduced_ode(pair, ansatz, trials=30, rng=None, ledger=None):
    """
    Compare the factored reduced residuals to the encoded ODEs, returns
    name -> bool. Mismatches are appended to ledger.
    """
    reduced = dict(zip([n for n, _ in pair], apply_ansatz(pair, ansatz)))
    env = Env(ansatz.values)
    res = OrderedDict()
    for name, ode in ansatz.odes.items():
        R = reduced[name]
        factor = ansatz.factors.get(name)
        if factor is not None:
            R = mul(R, power(factor, -1))
        expected = substitute(ode, {XI: ansatz.xi})
        if ansatz.shell:
            R = substitute(R, ansatz.shell)
            expected = substitute(expected, ansatz.shell)
        domain = standin_domain(add(R, expected), ansatz)
        ok = equivalent(R, expected, domain=domain, trials=trials, rng=rng,
                        env=env)
        if not ok:
            log_residual('Reduced %s of %s differs from' % (
                name, ansatz.entry_id), ode, exception=True)
            if ledger is not None:
                ledger.append(OrderedDict([
                    ('entry', ansatz.entry_id), ('residual', name),
                    ('printed', str(ode)), ('machine', str(R)),
                ]))
        res[name] = ok
    return res


def generator_field(case_id, element, values=None):
    """
    Vector field of an element such as 'X3 + a*X4', coefficients may
    hold parameters.
    """
    case = get_case(case_id)
    e = parse(element)
    coeffs = []
    for name in case.names:
        coeffs.append(simplify(substitute(differentiate(e, name),
                                          values or {})))
    return case.field(coeffs)


def annihilates(ansatz, trials=20, rng=None):
    """
    The generator applied to xi and to the invariants must vanish
    identically
    """
    if not ansatz.element:
        raise SymredError('Entry %s has no generator' % ansatz.entry_id)
    V = generator_field(ansatz.case_id, ansatz.element)
    env = Env(ansatz.values)
    res = OrderedDict()
    for label, e in [('xi', ansatz.xi)] + [
            ('invariant %s' % i, e) for i, e in enumerate(ansatz.invariants)]:
        image = simplify(V.apply(e))
        domain = dict(CHART_DOMAIN, **ansatz.chart_domain())
        domain.update(ansatz.domain)
        for name in image.free_symbols():
            domain.setdefault(name, (0.5, 1.5))
        res[label] = equivalent(image, 0, domain=domain, trials=trials,
                                rng=rng, env=env)
    return res
