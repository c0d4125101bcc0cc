from collections import OrderedDict
import math

import numpy
from scipy.linalg import expm
from scipy.optimize import minimize

from .context import ChartError, ClosureError, SymredError
from .expression import (as_expr, parse, add, mul, neg, power, call,
                         differentiate, substitute, simplify, polynomial,
                         evaluate, equivalent, to_text, Env, Number, Symbol,
                         ZERO, ONE, MINUS_ONE)
from .utils import logger, CASES

CHART = ('t', 'x', 'u0', 'u1')
POTENTIAL_CHART = ('t', 'x', 'u0', 'v0', 'u1', 'v1')
FLOW_PARAM = 'sigma'

PARAM_DOMAIN = {'p': (0.5, 2.0), 'q': (-1.0, 1.0), 's': (-2.0, 1.0)}
CHART_DOMAIN = dict((name, (0.5, 2.0)) for name in POTENTIAL_CHART)
DEFAULT_VALUES = {'p': 1.0, 'q': 0.0, 's': 0.25}
ZERO_TOL = 1e-9
SEARCH_TOL = 1e-8

GENERATORS = {
    'I': OrderedDict([
        ('X1', {'t': '1'}),
        ('X2', {'x': '1'}),
        ('X3', {'t': 't', 'x': 'x', 'u1': '-u1'}),
        ('X4', {'x': 'x', 'u0': '2*p', 'u1': '2*s*u1'}),
    ]),
    'II': OrderedDict([
        ('X1', {'t': '1'}),
        ('X2', {'x': '1'}),
        ('X3', {'t': 't', 'x': 'x', 'u1': '-u1'}),
        ('X4', {'x': 'x', 'u0': '2*p*(u0+q)', 'u1': '2*s*u1'}),
    ]),
    'III': OrderedDict([
        ('X1', {'t': '1'}),
        ('X2', {'x': '1'}),
        ('X3', {'t': 't', 'x': 'x', 'u1': '-u1'}),
        ('X4', {'x': 'x', 'u0': '-3/2*(u0+q)', 'u1': '-3/2*u1'}),
        ('X5', {'x': 'x^2', 'u0': '-3*x*(u0+q)', 'u1': '-3*x*u1'}),
    ]),
    'IV': OrderedDict([
        ('X1', {'t': '1'}),
        ('X2', {'x': '1'}),
        ('X3', {'v0': '1'}),
        ('X4', {'v1': '1'}),
        ('X5', {'t': 't', 'x': 'x', 'u1': '-u1', 'v1': '-v1'}),
        ('X6', {'x': 'x', 'u0': '2*p', 'v0': 'v0', 'u1': '2*s*u1',
                'v1': '(2*s+1)*v1'}),
    ]),
    'V': OrderedDict([
        ('X1', {'t': '1'}),
        ('X2', {'x': '1'}),
        ('X3', {'v0': '1'}),
        ('X4', {'v1': '1'}),
        ('X5', {'t': 't', 'x': 'x', 'u1': '-u1', 'v1': '-v1'}),
        ('X6', {'x': 'x', 'u0': '2*p*(u0+q)', 'v0': '(2*p+1)*v0',
                'u1': '2*s*u1', 'v1': '(2*s+1)*v1'}),
    ]),
}

# Flows the generic integrator does not cover, in terms of FLOW_PARAM
FLOWS = {
    'III': {
        'X5': {
            'x': 'x/(1-sigma*x)',
            'u0': '(1-sigma*x)^3*(u0+q)-q',
            'u1': '(1-sigma*x)^3*u1',
        },
    },
}


class VectorField:

    def __init__(self, chart, coeffs, name=None):
        self.chart = tuple(chart)
        self.coeffs = tuple(as_expr(c) for c in coeffs)
        if len(self.coeffs) != len(self.chart):
            raise ChartError('Expected %s coefficients, got %s' % (
                len(self.chart), len(self.coeffs)))
        self.name = name

    @classmethod
    def from_dict(cls, chart, mapping, name=None):
        unknown = set(mapping) - set(chart)
        if unknown:
            raise ChartError('Coordinates %s not in chart %s' % (
                ', '.join(sorted(unknown)), chart))
        return cls(chart, [mapping.get(z, ZERO) for z in chart], name=name)

    def __getitem__(self, coord):
        return self.coeffs[self.chart.index(coord)]

    def apply(self, e):
        "Action of the field as a derivation"
        e = as_expr(e)
        return add(*(
            mul(c, differentiate(e, z))
            for z, c in zip(self.chart, self.coeffs) if c != ZERO
        ))

    def _check(self, other):
        if self.chart != other.chart:
            raise ChartError('Chart mismatch: %s vs %s' % (
                self.chart, other.chart))

    def __add__(self, other):
        self._check(other)
        return VectorField(self.chart, [
            add(a, b) for a, b in zip(self.coeffs, other.coeffs)])

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        return self * MINUS_ONE

    def __mul__(self, scalar):
        scalar = as_expr(scalar)
        return VectorField(self.chart, [mul(scalar, c) for c in self.coeffs])

    __rmul__ = __mul__

    def is_zero(self, rng=None):
        return all(is_zero(c, rng=rng) for c in self.coeffs)

    def __str__(self):
        terms = [
            '%s*d_%s' % (wrap_coeff(c), z)
            for z, c in zip(self.chart, self.coeffs) if c != ZERO
        ]
        return ' + '.join(terms) or '0'

    def __repr__(self):
        return '<VectorField %s: %s>' % (self.name or '', self)


def wrap_coeff(c):
    text = to_text(c)
    if ' ' in text:
        return '(%s)' % text
    return text


def is_zero(e, rng=None, domain=None):
    e = simplify(e)
    if e == ZERO:
        return True
    if isinstance(e, Number):
        return False
    rng = rng or numpy.random.default_rng(0)
    domain = domain or dict(CHART_DOMAIN, **PARAM_DOMAIN)
    return equivalent(e, ZERO, domain=domain, trials=12, tol=1e-10, rng=rng)


def bracket(V, W):
    """
    Commutator [V, W], component k is sum_j V_j d_j W_k - W_j d_j V_k
    """
    V._check(W)
    coeffs = [
        simplify(add(V.apply(wk), neg(W.apply(vk))))
        for vk, wk in zip(V.coeffs, W.coeffs)
    ]
    name = None
    if V.name and W.name:
        name = '[%s,%s]' % (V.name, W.name)
    return VectorField(V.chart, coeffs, name=name)


class LieAlgebraCase:

    def __init__(self, case_id, chart, basis, params, flows=None):
        self.id = case_id
        self.chart = tuple(chart)
        self.basis = OrderedDict(basis)
        self.names = list(self.basis)
        self.params = tuple(params)
        self.flows = flows or {}
        self._constants = None
        self._numeric = {}

    @property
    def dim(self):
        return len(self.basis)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise SymredError('No generator "%s" in case %s' % (
                name, self.id))

    def constants(self):
        if self._constants is None:
            self._constants = structure_constants(self)
        return self._constants

    def numeric_constants(self, values=None):
        values = self.values(values)
        key = tuple(sorted(values.items()))
        if key not in self._numeric:
            env = Env(values)
            consts = self.constants()
            arr = numpy.zeros((self.dim,) * 3)
            for i in range(self.dim):
                for j in range(self.dim):
                    for k in range(self.dim):
                        if consts[i][j][k] != ZERO:
                            arr[i, j, k] = evaluate(consts[i][j][k], env)
            self._numeric[key] = arr
        return self._numeric[key]

    def values(self, values=None):
        values = dict(values or {})
        for name in self.params:
            values.setdefault(name, DEFAULT_VALUES[name])
        return values

    def element(self, coeffs, values=None):
        return AlgebraElement(self, coeffs, values=values)

    def basis_element(self, name, values=None):
        coeffs = numpy.zeros(self.dim)
        coeffs[self.index(name)] = 1.0
        return AlgebraElement(self, coeffs, values=values)

    def field(self, coeffs):
        res = None
        for c, X in zip(coeffs, self.basis.values()):
            term = X * as_expr(c)
            res = term if res is None else res + term
        return res

    def __repr__(self):
        return '<LieAlgebraCase %s dim=%s>' % (self.id, self.dim)


def case_params(case_id):
    return {
        'I': ('p', 's'),
        'II': ('p', 'q', 's'),
        'III': ('q',),
        'IV': ('p', 's'),
        'V': ('p', 'q', 's'),
    }[case_id]


_CASES = {}


def get_case(case_id):
    case_id = str(case_id).upper()
    if case_id not in GENERATORS:
        raise SymredError('Unknown case "%s" (expected one of %s)' % (
            case_id, ', '.join(CASES)))
    if case_id not in _CASES:
        chart = POTENTIAL_CHART if case_id in ('IV', 'V') else CHART
        basis = OrderedDict(
            (name, VectorField.from_dict(
                chart, dict((z, parse(c)) for z, c in spec.items()),
                name=name))
            for name, spec in GENERATORS[case_id].items()
        )
        _CASES[case_id] = LieAlgebraCase(
            case_id, chart, basis, case_params(case_id),
            flows=FLOWS.get(case_id))
    return _CASES[case_id]


def field_polynomial(V):
    res = {}
    for idx, c in enumerate(V.coeffs):
        for mono, coeff in polynomial(c, V.chart).items():
            res[(idx, mono)] = coeff
    return res


def solve_span(columns, rhs):
    """
    Express rhs in the span of columns (dicts of row -> coefficient)
    by Gaussian elimination over expressions. Returns the coefficient
    list, or None when rhs is not in the span.
    """
    n = len(columns)
    rows = sorted(set(rhs).union(*columns))
    matrix = [[col.get(r, ZERO) for col in columns] + [rhs.get(r, ZERO)]
              for r in rows]
    used = set()
    pivot_rows = []
    for k in range(n):
        candidates = [i for i in range(len(rows))
                      if i not in used and matrix[i][k] != ZERO]
        numeric = [i for i in candidates if isinstance(matrix[i][k], Number)]
        pick = (numeric or [i for i in candidates
                            if not is_zero(matrix[i][k])] or [None])[0]
        if pick is None:
            raise SymredError('Basis fields are linearly dependent')
        used.add(pick)
        pivot_rows.append(pick)
        inv = power(matrix[pick][k], MINUS_ONE)
        matrix[pick] = [simplify(mul(inv, v)) for v in matrix[pick]]
        for i in range(len(rows)):
            if i == pick or matrix[i][k] == ZERO:
                continue
            factor = matrix[i][k]
            matrix[i] = [
                simplify(add(v, neg(mul(factor, w))))
                for v, w in zip(matrix[i], matrix[pick])
            ]
    for i in range(len(rows)):
        if i not in used and not is_zero(matrix[i][n]):
            return None
    return [matrix[pivot_rows[k]][n] for k in range(n)]


def structure_constants(case):
    """
    Tensor c[i][j][k] with [Xi, Xj] = sum_k c[i][j][k] Xk
    """
    fields = list(case.basis.values())
    columns = [field_polynomial(X) for X in fields]
    n = len(fields)
    consts = [[[ZERO] * n for _ in range(n)] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            B = bracket(fields[i], fields[j])
            coeffs = solve_span(columns, field_polynomial(B))
            if coeffs is None:
                raise ClosureError('not closed: [%s, %s] = %s' % (
                    case.names[i], case.names[j], B))
            for k, c in enumerate(coeffs):
                consts[i][j][k] = c
                consts[j][i][k] = simplify(neg(c))
    logger.debug('Structure constants of case %s computed', case.id)
    return consts


def closure_residual(case, i, j):
    "[Xi, Xj] minus its projection on the basis"
    consts = case.constants()
    fields = list(case.basis.values())
    B = bracket(fields[i], fields[j])
    return B - case.field(consts[i][j])


def bracket_table(case, nonzero=True):
    consts = case.constants()
    for i, a in enumerate(case.names):
        for j, b in enumerate(case.names):
            text = combination_text(consts[i][j], case.names)
            if nonzero and (i >= j or text == '0'):
                continue
            yield a, b, text


def combination_text(coeffs, names):
    terms = []
    for c, name in zip(coeffs, names):
        c = as_expr(c)
        if c == ZERO:
            continue
        if c == ONE:
            terms.append(name)
        elif c == MINUS_ONE:
            terms.append('-' + name)
        else:
            terms.append('%s*%s' % (wrap_coeff(c), name))
    return ' + '.join(terms).replace('+ -', '- ') or '0'


class AlgebraElement:

    def __init__(self, case, coeffs, values=None):
        self.case = case
        self.coeffs = numpy.array(coeffs, dtype=float)
        if self.coeffs.shape != (case.dim,):
            raise SymredError('Case %s elements have %s coefficients' % (
                case.id, case.dim))
        self.values = case.values(values)

    def __getitem__(self, name):
        return self.coeffs[self.case.index(name)]

    def norm(self):
        return float(numpy.linalg.norm(self.coeffs))

    def is_zero(self):
        return self.norm() == 0

    def __add__(self, other):
        return AlgebraElement(self.case, self.coeffs + other.coeffs,
                              self.values)

    def __sub__(self, other):
        return AlgebraElement(self.case, self.coeffs - other.coeffs,
                              self.values)

    def __mul__(self, scalar):
        return AlgebraElement(self.case, self.coeffs * float(scalar),
                              self.values)

    __rmul__ = __mul__

    def allclose(self, other, tol=1e-8):
        scale = 1 + max(self.norm(), other.norm())
        return numpy.allclose(self.coeffs, other.coeffs, rtol=0,
                              atol=tol * scale)

    def field(self):
        return self.case.field(self.coeffs)

    def __str__(self):
        terms = []
        for c, name in zip(self.coeffs, self.case.names):
            if c == 0:
                continue
            if c == 1:
                terms.append(name)
            elif c == -1:
                terms.append('-' + name)
            else:
                terms.append('%.6g*%s' % (c, name))
        return ' + '.join(terms).replace('+ -', '- ') or '0'

    def __repr__(self):
        return '<AlgebraElement %s: %s>' % (self.case.id, self)


def parse_element(case, text, values=None):
    "Parse strings such as '5*X1 + 7*X2 + X3 + 2*X4'"
    e = parse(text)
    unknown = e.free_symbols() - set(case.names)
    if unknown:
        raise SymredError('Unknown generator(s) %s for case %s' % (
            ', '.join(sorted(unknown)), case.id))
    coeffs = []
    origin = dict((name, 0) for name in case.names)
    for name in case.names:
        d = differentiate(e, name)
        if d.free_symbols():
            raise SymredError('Element "%s" is not linear' % text)
        coeffs.append(evaluate(d))
    if evaluate(e, Env(origin)) != 0:
        raise SymredError('Element "%s" has a constant term' % text)
    return AlgebraElement(case, coeffs, values=values)


def ad_matrix(Y, values=None):
    """
    Matrix M of ad Y, such that (ad Y)X has coefficients M @ x
    """
    case = Y.case
    consts = case.numeric_constants(values or Y.values)
    return numpy.einsum('i,ijk->kj', Y.coeffs, consts)


def bch_conjugate(Y, X, order=None, values=None):
    """
    Ad(exp Y) X as the series sum_k ad(Y)^k X / k!, truncated at order
    or summed through the matrix exponential when order is None.
    """
    M = ad_matrix(Y, values)
    if order is None:
        coeffs = expm(M) @ X.coeffs
    else:
        term = X.coeffs.copy()
        coeffs = term.copy()
        for k in range(1, order + 1):
            term = M @ term / k
            coeffs = coeffs + term
    return AlgebraElement(X.case, coeffs, X.values)


# Flows


def flow(case, name, s=None):
    """
    Closed-form one-parameter group of a basis field: a map from chart
    coordinates to expressions in the coordinates and s.
    """
    if isinstance(case, str):
        case = get_case(case)
    V = case.basis[case.names[case.index(name)]]
    s = as_expr(FLOW_PARAM if s is None else s)
    table = case.flows.get(name)
    res = OrderedDict()
    for z, c in zip(case.chart, V.coeffs):
        if table and z in table:
            res[z] = substitute(parse(table[z]), {FLOW_PARAM: s})
        else:
            res[z] = integrate_component(case, name, z, c, s)
    return res


def integrate_component(case, name, z, c, s):
    if c == ZERO:
        return Symbol(z)
    others = c.free_symbols() & (set(case.chart) - {z})
    if others:
        raise SymredError(
            'No closed-form flow for %s (%s depends on %s)' % (
                name, z, ', '.join(sorted(others))))
    poly = polynomial(c, [z])
    degree = max(k[0] for k in poly)
    zs = Symbol(z)
    if degree == 0:
        return add(zs, mul(c, s))
    if degree == 1 and set(poly) <= {(0,), (1,)}:
        k = poly[(1,)]
        m = poly.get((0,), ZERO)
        grow = call('exp', mul(k, s))
        res = mul(zs, grow)
        if m != ZERO:
            res = add(res, mul(m, add(grow, MINUS_ONE), power(k, MINUS_ONE)))
        return res
    if degree == 2 and set(poly) == {(2,)}:
        k = poly[(2,)]
        return mul(zs, power(add(ONE, neg(mul(k, s, zs))), MINUS_ONE))
    raise SymredError('No closed-form flow for %s along %s' % (name, z))


# Golden lists

GOLDEN_2A2 = [
    ('{X1}', 'X1'),
    ('{X4}', 'X4'),
    ('{X2}', 'X2'),
    ('{X3+aX4}', 'X3 + a*X4'),
    ('{X4-X3+εX2}', 'X4 - X3 + sgn*X2'),
    ('{X1+εX2}', 'X1 + sgn*X2'),
    ('{X1+εX4}', 'X1 + sgn*X4'),
]

GOLDEN_III = [
    ('{X3-X4}', 'X3 - X4'),
    ('{X1}', 'X1'),
    ('{X2}', 'X2'),
    ('{X4}', 'X4'),
    ('{X2-X5}', 'X2 - X5'),
    ('{X3-X4+εX2}', 'X3 - X4 + sgn*X2'),
    ('{X3+aX4}', 'X3 + a*X4'),
    ('{X3-X4+a(X2-X5)}', 'X3 - X4 + a*(X2 - X5)'),
    ('{X1+εX2}', 'X1 + sgn*X2'),
    ('{X1+εX4}', 'X1 + sgn*X4'),
    ('{X1+ε(X2-X5)}', 'X1 + sgn*(X2 - X5)'),
]

# Orbits of case III missing from the printed list (elliptic parts)
EXTRA_III = [
    ('{X2+X5}', 'X2 + X5'),
    ('{X3-X4+a(X2+X5)}', 'X3 - X4 + a*(X2 + X5)'),
    ('{X1+ε(X2+X5)}', 'X1 + sgn*(X2 + X5)'),
]

SEMI_TERMS = [
    [],
    ['X1'], ['X2'], ['X1', 'X2'],
    ['X3'], ['X3', 'X1'], ['X3', 'X2'], ['X3', 'X1', 'X2'],
    ['X4'], ['X4', 'X1'], ['X4', 'X2'], ['X4', 'X1', 'X2'],
    ['X4', 'X3'], ['X4', 'X3', 'X1'], ['X4', 'X3', 'X2'],
    ['X4', 'X3', 'X1', 'X2'],
]


def semi_golden():
    "The 63 classes of the semi-direct sum, in printed order"
    res = []
    for terms in SEMI_TERMS[1:]:
        res.append(semi_entry(None, terms))
    for head in ('X5', 'X6', 'X5+aX6'):
        for terms in SEMI_TERMS:
            if head == 'X5' and terms[:2] == ['X4', 'X3']:
                terms = terms[:2] + list(reversed(terms[2:]))
            res.append(semi_entry(head, terms))
    return res


def semi_entry(head, terms):
    params = iter(['a', 'b', 'c', 'd'])
    if head == 'X5+aX6':
        next(params)
    label, template = [], []
    if head:
        label.append(head)
        template.append('X5 + a*X6' if head == 'X5+aX6' else head)
    for pos, term in enumerate(terms):
        if pos == 0 and head:
            label.append('ε' + term)
            template.append('sgn*' + term)
        elif pos == 0:
            label.append(term)
            template.append(term)
        elif pos == 1 and not head:
            label.append('ε' + term)
            template.append('sgn*' + term)
        else:
            p = next(params)
            label.append(p + term)
            template.append('%s*%s' % (p, term))
    return '{%s}' % '+'.join(label), ' + '.join(template)


class GoldenClass:

    def __init__(self, case, index, label, template, printed=True):
        self.case = case
        self.index = index
        self.label = label
        self.template = parse(template)
        self.params = sorted(
            self.template.free_symbols() - set(case.names))
        self.printed = printed
        self.coeff_exprs = [
            differentiate(self.template, name) for name in case.names]

    @property
    def name(self):
        if self.case.id in ('IV', 'V') and self.printed:
            return 'L%s' % self.index
        return self.label

    def representative(self, params=None, values=None):
        env = Env(dict(params or {}))
        return AlgebraElement(self.case, [
            evaluate(c, env) for c in self.coeff_exprs], values=values)

    def sample(self, rng):
        res = {}
        for name in self.params:
            if name == 'sgn':
                res[name] = float(rng.choice([-1.0, 1.0]))
            else:
                res[name] = float(rng.choice([-1.0, 1.0])
                                  * rng.uniform(0.25, 2.0))
        return res

    def fit(self, X, tol=1e-8):
        """
        Parameters and scale such that X = scale * template(params), or
        None when X does not have this form.
        """
        scale = None
        for c, value in zip(self.coeff_exprs, X.coeffs):
            if isinstance(c, Number) and c != ZERO:
                scale = value / float(c.value)
                break
        if scale is None or abs(scale) <= tol * X.norm():
            return None
        x = X.coeffs / scale
        params = {}
        for c, value in zip(self.coeff_exprs, x):
            free = c.free_symbols()
            if len(free) == 1:
                name, = free
                if name not in params:
                    slope = evaluate(differentiate(c, name))
                    params[name] = value / slope
        if 'sgn' in params:
            if abs(abs(params['sgn']) - 1) > tol:
                return None
            params['sgn'] = math.copysign(1.0, params['sgn'])
        for name, value in params.items():
            # a vanishing parameter changes the support, hence the class
            if abs(value) <= tol and self.label != '{X3+aX4}':
                return None
        rep = self.representative(params)
        if not numpy.allclose(rep.coeffs, x, rtol=0, atol=tol * (1 + abs(
                x).max())):
            return None
        return scale, params

    def __repr__(self):
        return '<GoldenClass %s %s>' % (self.name, self.label)


_GOLDEN = {}


def golden_list(case, extra=False):
    if isinstance(case, str):
        case = get_case(case)
    if case.id not in _GOLDEN:
        if case.id in ('I', 'II'):
            rows = [(lbl, tpl, True) for lbl, tpl in GOLDEN_2A2]
        elif case.id == 'III':
            rows = [(lbl, tpl, True) for lbl, tpl in GOLDEN_III]
            rows += [(lbl, tpl, False) for lbl, tpl in EXTRA_III]
        else:
            rows = [(lbl, tpl, True) for lbl, tpl in semi_golden()]
        _GOLDEN[case.id] = [
            GoldenClass(case, pos + 1, lbl, tpl, printed)
            for pos, (lbl, tpl, printed) in enumerate(rows)
        ]
    return [g for g in _GOLDEN[case.id] if g.printed or extra]


def golden_class(case, label):
    for g in golden_list(case, extra=True):
        if g.label == label or g.name == label:
            return g
    raise SymredError('No class %s in case %s' % (label, case.id))


# Normalization


class NormalForm:

    def __init__(self, case):
        self.case = case
        self.label = None
        self.index = None
        self.params = {}
        self.representative = None
        self.orbit = None
        self.orbit_params = {}
        self.orbit_representative = None
        self.conjugator = []
        self.notes = []

    def describe(self, label=None, params=None):
        label = label or self.label
        params = self.params if params is None else params
        parts = [label]
        for name in sorted(params):
            value = params[name]
            if name == 'sgn':
                parts.append('ε=%d' % value)
            else:
                parts.append('%s=%.6f' % (name, value))
        return ', '.join(parts)

    def __str__(self):
        text = self.describe()
        if self.case.id in ('IV', 'V'):
            text = 'L%s %s' % (self.index, text)
        return text

    def __repr__(self):
        return '<NormalForm %s orbit=%s>' % (self, self.orbit)


def normalize(case, X, values=None, tol=ZERO_TOL):
    """
    Locate the class of the one-dimensional subalgebra spanned by X.
    `label` is the printed class whose form X takes (after rescaling),
    `orbit` the canonical representative reached by conjugation.
    """
    if isinstance(case, str):
        case = get_case(case)
    if values is not None:
        X = AlgebraElement(case, X.coeffs, values)
    if X.norm() == 0:
        raise SymredError('Cannot classify the zero element')
    res = NormalForm(case)
    if case.id in ('I', 'II'):
        orbit_2a2(res, X, tol)
    elif case.id == 'III':
        orbit_a2_sl2(res, X, tol)
    else:
        orbit_semi(res, X, tol)

    match = printed_match(case, X, tol)
    if match is None:
        g = golden_class(case, res.orbit)
        res.label = res.orbit
        res.index = g.index
        res.params = dict(res.orbit_params)
        res.representative = res.orbit_representative
    else:
        g, params = match
        res.label, res.index, res.params = g.label, g.index, params
        res.representative = g.representative(params, X.values)
        if res.label != res.orbit:
            res.notes.append('%s is conjugate to %s' % (
                res.label, res.describe(res.orbit, res.orbit_params)))
    if not golden_class(case, res.label).printed:
        res.notes.append('%s is missing from the printed list' % res.label)
    if res.label == '{X3+aX4}' and abs(res.params.get('a', 1)) <= tol:
        res.notes.append('a=0 lies outside the printed range a≠0')
    return res


def printed_match(case, X, tol):
    if case.id in ('IV', 'V'):
        X, _ = semi_rescale(case, X, tol)
    for g in golden_list(case, extra=True):
        fit = g.fit(X, tol=1e-8)
        if fit is not None:
            return g, fit[1]
    return None


def small(value, scale, tol):
    return abs(value) <= tol * scale


def sign(value):
    return 1.0 if value >= 0 else -1.0


def finish_orbit(res, label, params, conjugator):
    g = golden_class(res.case, label)
    res.orbit = label
    res.orbit_params = params
    res.orbit_representative = g.representative(params)
    res.conjugator.extend(conjugator)


def orbit_2a2(res, X, tol):
    a1, a2, a3, a4 = X.coeffs
    scale = X.norm()
    conj = []
    if not small(a3, scale, tol):
        conj.append(('X1', -a1 / a3))
        a = a4 / a3
        if not small(1 + a, 1, tol):
            conj.append(('X2', -a2 / (a3 + a4)))
            return finish_orbit(res, '{X3+aX4}', {'a': a}, conj)
        if small(a2, scale, tol):
            return finish_orbit(res, '{X3+aX4}', {'a': -1.0}, conj)
        conj.append(('X3+X4', math.log(abs(a2 / a3))))
        return finish_orbit(res, '{X4-X3+εX2}', {'sgn': sign(-a2 * a3)},
                            conj)
    if not small(a4, scale, tol):
        conj.append(('X2', -a2 / a4))
        if small(a1, scale, tol):
            return finish_orbit(res, '{X4}', {}, conj)
        conj.append(('X3', math.log(abs(a1 / a4))))
        return finish_orbit(res, '{X1+εX4}', {'sgn': sign(a1 * a4)}, conj)
    if small(a1, scale, tol):
        return finish_orbit(res, '{X2}', {}, conj)
    if small(a2, scale, tol):
        return finish_orbit(res, '{X1}', {}, conj)
    conj.append(('X4', math.log(abs(a2 / a1))))
    return finish_orbit(res, '{X1+εX2}', {'sgn': sign(a1 * a2)}, conj)


def sl2_invariants(c2, c4, c5, tol):
    """
    Type of c2*X2 + c4*X4 + c5*X5 under SL(2,R): ('zero'|'nilpotent'|
    'hyperbolic'|'elliptic', signed size)
    """
    scale = abs(c2) + abs(c4) + abs(c5)
    if scale == 0:
        return 'zero', 0.0
    delta = c4 * c4 - 4 * c2 * c5
    if abs(delta) <= tol * scale * scale:
        return 'nilpotent', sign(c2 + c5)
    if delta > 0:
        return 'hyperbolic', math.sqrt(delta)
    return 'elliptic', sign(c2) * math.sqrt(-delta) / 2


def orbit_a2_sl2(res, X, tol):
    b1, c2, b3, c4_raw, c5 = X.coeffs
    # rewrite on {X1, X3-X4} + {X2, X4, X5}
    bz, c4 = b3, c4_raw + b3
    scale = X.norm()
    conj = []
    if not small(bz, scale, tol):
        conj.append(('X1', -b1 / bz))
        kind, size = sl2_invariants(c2 / bz, c4 / bz, c5 / bz, tol)
        if kind == 'zero' or small(size, 1, tol):
            return finish_orbit(res, '{X3-X4}', {}, conj)
        if kind == 'nilpotent':
            return finish_orbit(res, '{X3-X4+εX2}', {'sgn': size}, conj)
        if kind == 'hyperbolic':
            return finish_orbit(res, '{X3+aX4}', {'a': size - 1}, conj)
        return finish_orbit(res, '{X3-X4+a(X2+X5)}', {'a': size}, conj)
    kind, size = sl2_invariants(c2, c4, c5, tol)
    if small(b1, scale, tol):
        if kind == 'zero':
            raise SymredError('Cannot classify the zero element')
        label = {'nilpotent': '{X2}', 'hyperbolic': '{X4}',
                 'elliptic': '{X2+X5}'}[kind]
        return finish_orbit(res, label, {}, conj)
    if kind == 'zero':
        return finish_orbit(res, '{X1}', {}, conj)
    if kind == 'nilpotent':
        return finish_orbit(res, '{X1+εX2}', {'sgn': sign(b1) * size}, conj)
    if kind == 'hyperbolic':
        return finish_orbit(res, '{X1+εX4}', {'sgn': 1.0}, conj)
    return finish_orbit(res, '{X1+ε(X2+X5)}', {'sgn': sign(b1 * size)},
                        conj)


def semi_weights(case, values):
    "Diagonal action of X5, X6 on X1..X4: [Xj, Xi] = mu[j][i] Xi"
    consts = case.numeric_constants(values)
    return numpy.array([
        [consts[j, i, i] for i in range(4)] for j in (4, 5)
    ])


def semi_head(X, tol):
    a5, a6 = X.coeffs[4], X.coeffs[5]
    scale = X.norm()
    if small(a5, scale, tol) and small(a6, scale, tol):
        return None
    if small(a6, scale, tol):
        return 'X5'
    if small(a5, scale, tol):
        return 'X6'
    return 'X5+aX6'


def semi_rescale(case, X, tol):
    """
    Rescale X (ray scaling and dilations by X5, X6) so that the leading
    coefficient is 1 and the ε-slot coefficient is ±1.
    """
    head = semi_head(X, tol)
    x = X.coeffs.copy()
    scale = X.norm()
    support = [i for i in range(4) if not small(x[i], scale, tol)]
    x[[i for i in range(4) if i not in support]] = 0
    order = template_order(head, support)
    mu = semi_weights(case, X.values)
    conj = []
    if head is None:
        lead, slot = order[0], (order[1] if len(order) > 1 else None)
        x = x / x[lead]
        ref = mu[:, lead]
    else:
        lead = 4 if head in ('X5', 'X5+aX6') else 5
        slot = order[0] if order else None
        x = x / x[lead]
        ref = numpy.zeros(2)
    if slot is not None:
        direction = mu[:, slot] - ref
        norm2 = float(direction @ direction)
        if norm2 > tol:
            g = -math.log(abs(x[slot])) * direction / norm2
            factors = numpy.exp(g @ mu)
            x[:4] = x[:4] * factors
            if head is None:
                x = x / x[lead]
            conj.append(('X5,X6', tuple(g)))
    return AlgebraElement(case, x, X.values), conj


def template_order(head, support):
    names = ['X%d' % (i + 1) for i in support]
    for terms in SEMI_TERMS:
        if sorted(terms) == sorted(names):
            if head == 'X5' and terms[:2] == ['X4', 'X3']:
                terms = terms[:2] + list(reversed(terms[2:]))
            return [int(t[1:]) - 1 for t in terms]
    return []


def orbit_semi(res, X, tol):
    head = semi_head(X, tol)
    x = X.coeffs.copy()
    conj = []
    if head is not None:
        mu = semi_weights(X.case, X.values)
        diag = x[4:6]
        weights = -(diag @ mu)
        for i in range(4):
            if abs(weights[i]) > tol * (1 + numpy.abs(diag).max()):
                t = -x[i] / weights[i]
                conj.append(('X%d' % (i + 1), t))
                x[i] = 0.0
    Y = AlgebraElement(X.case, x, X.values)
    Y, more = semi_rescale(X.case, Y, tol)
    conj.extend(more)
    for g in golden_list(X.case):
        fit = g.fit(Y, tol=1e-8)
        if fit is not None:
            return finish_orbit(res, g.label, fit[1], conj)
    return search_orbit(res, X)


# Generic fallback


def orbit_search(case, X, target, values=None, tol=SEARCH_TOL, starts=8,
                 rng=None):
    """
    Nelder-Mead search over group parameters Y minimizing the distance
    between the ray of Ad(exp Y) X and the ray of target. Returns
    (distance, Y coefficients).
    """
    rng = rng or numpy.random.default_rng(0)
    unit = target.coeffs / numpy.linalg.norm(target.coeffs)

    def distance(y):
        Y = AlgebraElement(case, y, values or X.values)
        z = bch_conjugate(Y, X).coeffs
        nz = numpy.linalg.norm(z)
        if not numpy.isfinite(nz) or nz == 0:
            return 1e6
        z = z / nz
        return float(min(numpy.sum((z - unit) ** 2),
                         numpy.sum((z + unit) ** 2)))

    best = None
    for attempt in range(starts):
        y0 = numpy.zeros(case.dim) if attempt == 0 else \
            rng.uniform(-1, 1, case.dim)
        found = minimize(distance, y0, method='Nelder-Mead', options={
            'xatol': 1e-12, 'fatol': 1e-16, 'maxiter': 4000 * case.dim})
        if best is None or found.fun < best[0]:
            best = (found.fun, found.x)
        if best[0] < tol:
            break
    logger.debug('Orbit search %s -> %s: %.3g', X, target, best[0])
    return best


def conjugate_to(case, X, target, values=None, tol=SEARCH_TOL, rng=None):
    dist, _ = orbit_search(case, X, target, values, tol=tol, rng=rng)
    return dist < tol


def ray_orbit_dim(T):
    "Dimension of the orbit of the ray through T: rank of [ad T | T]"
    M = ad_matrix(T)
    return int(numpy.linalg.matrix_rank(
        numpy.column_stack([M, T.coeffs])))


def search_orbit(res, X, tol=SEARCH_TOL):
    """
    Fallback when the decision tables leave X unplaced: orbit search
    against the classes without continuous parameters. Larger orbits are
    tried first, a smaller orbit may lie in the closure of a larger one.
    """
    targets = []
    for g in golden_list(X.case, extra=True):
        if set(g.params) - {'sgn'}:
            continue
        for params in ([{'sgn': 1.0}, {'sgn': -1.0}] if g.params else [{}]):
            target = g.representative(params, X.values)
            targets.append((ray_orbit_dim(target), g, params, target))
    targets.sort(key=lambda row: -row[0])
    for _, g, params, target in targets:
        dist, y = orbit_search(X.case, X, target, tol=tol)
        if dist < tol:
            return finish_orbit(res, g.label, params,
                                [('search', tuple(y))])
    raise SymredError('No class found for %s' % X)


# Re-based algebras


def rebased_constants(case, combos, values=None):
    """
    Structure constants in the basis given by `combos` (name -> element
    text), as a dict (a, b) -> coefficient vector on the new basis.
    """
    names = list(combos)
    rows = numpy.array([
        parse_element(case, combos[n], values).coeffs for n in names])
    if numpy.linalg.matrix_rank(rows) < len(names):
        raise SymredError('Degenerate basis %s' % combos)
    consts = case.numeric_constants(values)
    res = OrderedDict()
    for i, a in enumerate(names):
        for j, b in enumerate(names):
            if i >= j:
                continue
            old = numpy.einsum('i,j,ijk->k', rows[i], rows[j], consts)
            new, _, _, _ = numpy.linalg.lstsq(rows.T, old, rcond=None)
            if not numpy.allclose(rows.T @ new, old, atol=1e-10):
                raise ClosureError('not closed: [%s, %s]' % (a, b))
            res[a, b] = new
    return names, res


def two_a2_witness(case, values=None):
    "Split of cases I and II as {X1, X3-X4} + {X2, X4}"
    case = get_case(case) if isinstance(case, str) else case
    if case.id not in ('I', 'II'):
        raise SymredError('No 2A2 split for case %s' % case.id)
    return rebased_constants(case, OrderedDict([
        ('Y1', 'X1'), ('Y2', 'X3 - X4'), ('Y3', 'X2'), ('Y4', 'X4'),
    ]), values)


def direct_sum_witness(case, values=None):
    "Split of case III as {X1, Z} + sl(2) with Z = X3-X4"
    case = get_case(case) if isinstance(case, str) else case
    if case.id != 'III':
        raise SymredError('No A2 + sl(2) split for case %s' % case.id)
    return rebased_constants(case, OrderedDict([
        ('X1', 'X1'), ('Z', 'X3 - X4'), ('X2', 'X2'), ('X4', 'X4'),
        ('X5', 'X5'),
    ]), values)
