from fractions import Fraction
import math
import re

import numpy

from .context import (ExprSyntaxError, UnboundError, DomainError,
                      DerivativeError, ArityError, SymredError, setting)

BUILTINS = ('ln', 'exp', 'sqrt', 'sin', 'cos', 'abs')
FD_STEP = 1e-5
MAX_PASSES = 20


def fd_step(order):
    # order n: FD_STEP^(3/(n+2)), so order 1 uses FD_STEP itself
    return FD_STEP ** (3.0 / (order + 2))


class Expr:
    """
    Immutable expression node. Equality and hashing are structural,
    nodes are always built through the smart constructors (add, mul,
    power, call) so that equal values share one normal form as often
    as the rewrite rules allow.
    """

    __slots__ = ('_key', '_hash', '_free')
    rank = None

    def key(self):
        try:
            return self._key
        except AttributeError:
            self._key = self._sort_key()
            return self._key

    def __eq__(self, other):
        if self is other:
            return True
        if not isinstance(other, Expr):
            return False
        return hash(self) == hash(other) and self.key() == other.key()

    def __ne__(self, other):
        return not self == other

    def __hash__(self):
        try:
            return self._hash
        except AttributeError:
            self._hash = hash(self.key())
            return self._hash

    def __lt__(self, other):
        return self.key() < other.key()

    def free_symbols(self):
        try:
            return self._free
        except AttributeError:
            self._free = self._free_symbols()
            return self._free

    def has(self, name):
        return name in self.free_symbols()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return mul(self, power(as_expr(other), MINUS_ONE))

    def __rtruediv__(self, other):
        return mul(as_expr(other), power(self, MINUS_ONE))

    def __pow__(self, other):
        return power(self, as_expr(other))

    def __rpow__(self, other):
        return power(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __str__(self):
        return to_text(self)

    def __repr__(self):
        return '<%s "%s">' % (self.__class__.__name__, to_text(self))

    def diff(self, var, n=1, signs=None):
        res = self
        for _ in range(n):
            res = differentiate(res, var, signs=signs)
        return res

    def subs(self, bindings=None, fbindings=None):
        return substitute(self, bindings, fbindings)

    def evaluate(self, env):
        return evaluate(self, env)


class Number(Expr):
    __slots__ = ('value',)
    rank = 0

    def __init__(self, value):
        if isinstance(value, float):
            value = Fraction(repr(float(value)))
        self.value = Fraction(value)

    def _sort_key(self):
        return (self.rank, self.value)

    def _free_symbols(self):
        return frozenset()

    def is_integer(self):
        return self.value.denominator == 1


class Symbol(Expr):
    __slots__ = ('name',)
    rank = 1

    def __init__(self, name):
        self.name = name

    def _sort_key(self):
        return (self.rank, self.name)

    def _free_symbols(self):
        return frozenset([self.name])


class Add(Expr):
    __slots__ = ('args',)
    rank = 2

    def __init__(self, args):
        assert args
        self.args = tuple(args)

    def _sort_key(self):
        return (self.rank, tuple(a.key() for a in self.args))

    def _free_symbols(self):
        return frozenset().union(*(a.free_symbols() for a in self.args))


class Mul(Add):
    __slots__ = ()
    rank = 3


class Pow(Expr):
    __slots__ = ('base', 'exp')
    rank = 4

    def __init__(self, base, exp):
        self.base = base
        self.exp = exp

    def _sort_key(self):
        return (self.rank, self.base.key(), self.exp.key())

    def _free_symbols(self):
        return self.base.free_symbols() | self.exp.free_symbols()


class Call(Expr):
    __slots__ = ('name', 'arg')
    rank = 5

    def __init__(self, name, arg):
        self.name = name
        self.arg = arg

    def _sort_key(self):
        return (self.rank, self.name, self.arg.key())

    def _free_symbols(self):
        return self.arg.free_symbols()


class FuncApp(Expr):
    __slots__ = ('name', 'args', 'orders')
    rank = 6

    def __init__(self, name, args, orders=None):
        self.name = name
        self.args = tuple(args)
        if orders is None:
            orders = (0,) * len(self.args)
        self.orders = tuple(int(o) for o in orders)
        if len(self.orders) != len(self.args):
            raise ArityError('Function "%s" expects %s derivative orders' % (
                name, len(self.args)))
        if any(o < 0 for o in self.orders):
            raise ValueError('Negative derivative order for "%s"' % name)

    def _sort_key(self):
        return (self.rank, self.name, self.orders,
                tuple(a.key() for a in self.args))

    def _free_symbols(self):
        return frozenset().union(*(a.free_symbols() for a in self.args))

    def derivative(self, index=0):
        orders = list(self.orders)
        orders[index] += 1
        return FuncApp(self.name, self.args, orders)


ZERO = Number(0)
ONE = Number(1)
MINUS_ONE = Number(-1)
HALF = Number(Fraction(1, 2))


def as_expr(value):
    if isinstance(value, Expr):
        return value
    if isinstance(value, str):
        return parse(value)
    if isinstance(value, bool):
        raise TypeError('Cannot convert a boolean to an expression')
    if isinstance(value, (int, Fraction)):
        return Number(value)
    if isinstance(value, (float, numpy.floating)):
        if not math.isfinite(value):
            raise DomainError('Non-finite constant %r' % value)
        return Number(float(value))
    if isinstance(value, numpy.integer):
        return Number(int(value))
    raise TypeError('Cannot convert %r to an expression' % (value,))


def symbols(names):
    return tuple(Symbol(n) for n in names.replace(',', ' ').split())


def split_coeff(term):
    if isinstance(term, Mul) and isinstance(term.args[0], Number):
        rest = term.args[1:]
        if len(rest) == 1:
            return term.args[0].value, rest[0]
        return term.args[0].value, Mul(rest)
    if isinstance(term, Number):
        return term.value, ONE
    return Fraction(1), term


def scaled(coeff, rest):
    if coeff == 0:
        return ZERO
    if rest == ONE:
        return Number(coeff)
    if coeff == 1:
        return rest
    if isinstance(rest, Mul):
        return Mul((Number(coeff),) + rest.args)
    return Mul((Number(coeff), rest))


def add(*terms):
    const = Fraction(0)
    coeffs = {}
    pending = list(terms)
    while pending:
        term = as_expr(pending.pop())
        if isinstance(term, Number):
            const += term.value
        elif type(term) is Add:
            pending.extend(term.args)
        else:
            c, rest = split_coeff(term)
            coeffs[rest] = coeffs.get(rest, 0) + c

    out = sorted(
        (scaled(c, rest) for rest, c in coeffs.items() if c != 0),
        key=Expr.key)
    if const != 0:
        out.insert(0, Number(const))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    return Add(out)


def neg(e):
    return mul(MINUS_ONE, e)


def sub(a, b):
    return add(a, neg(as_expr(b)))


def mul(*factors):
    coeff = Fraction(1)
    powers = {}
    exp_args = []
    pending = list(factors)
    while pending:
        f = as_expr(pending.pop())
        if isinstance(f, Number):
            coeff *= f.value
        elif type(f) is Mul:
            pending.extend(f.args)
        elif isinstance(f, Call) and f.name == 'exp':
            exp_args.append(f.arg)
        elif isinstance(f, Pow):
            powers.setdefault(f.base, []).append(f.exp)
        else:
            powers.setdefault(f, []).append(ONE)
        if coeff == 0:
            return ZERO

    out = []
    again = []
    for base, exps in powers.items():
        p = power(base, exps[0] if len(exps) == 1 else add(*exps))
        if isinstance(p, (Number, Mul)) or (
                isinstance(p, Call) and p.name == 'exp'):
            again.append(p)
        else:
            out.append(p)
    if exp_args:
        e = call('exp', add(*exp_args))
        if isinstance(e, Call) and e.name == 'exp' and not again:
            out.append(e)
        else:
            again.append(e)
    if again:
        return mul(Number(coeff), *(out + again))

    out.sort(key=Expr.key)
    if not out:
        return Number(coeff)
    if coeff == 1 and len(out) == 1:
        return out[0]
    if coeff != 1:
        out.insert(0, Number(coeff))
    return Mul(out)


MAX_EXACT_EXPONENT = 64


def integer_root(n, k):
    if n < 0:
        return None
    r = int(round(n ** (1.0 / k))) if n < 2 ** 1000 else None
    if r is None:
        return None
    for cand in (r - 1, r, r + 1):
        if cand >= 0 and cand ** k == n:
            return cand
    return None


def rational_power(value, exponent):
    p, q = exponent.numerator, exponent.denominator
    if abs(p) > MAX_EXACT_EXPONENT or q > MAX_EXACT_EXPONENT:
        return None
    if value == 0:
        return Fraction(0) if exponent > 0 else None
    if q == 1:
        return value ** p
    if value < 0:
        return None
    num = integer_root(value.numerator, q)
    den = integer_root(value.denominator, q)
    if num is None or den is None:
        return None
    return Fraction(num, den) ** p


def power(base, exponent):
    base, exponent = as_expr(base), as_expr(exponent)
    if isinstance(exponent, Number):
        n = exponent.value
        if n == 0:
            return ONE
        if n == 1:
            return base
        if isinstance(base, Number):
            res = rational_power(base.value, n)
            if res is not None:
                return Number(res)
        elif n.denominator == 1 and isinstance(base, Pow):
            return power(base.base, mul(base.exp, exponent))
        elif n.denominator == 1 and isinstance(base, Mul):
            return mul(*(power(f, exponent) for f in base.args))
    if isinstance(base, Number) and base.value == 1:
        return ONE
    if isinstance(base, Call) and base.name == 'exp':
        return call('exp', mul(base.arg, exponent))
    return Pow(base, exponent)


def call(name, arg):
    if name not in BUILTINS:
        raise ExprSyntaxError('unknown builtin "%s"' % name)
    arg = as_expr(arg)
    if name == 'sqrt':
        return power(arg, HALF)
    if name == 'exp':
        if arg == ZERO:
            return ONE
        if isinstance(arg, Call) and arg.name == 'ln':
            return arg.arg
    elif name == 'ln':
        if arg == ONE:
            return ZERO
        if isinstance(arg, Call) and arg.name == 'exp':
            return arg.arg
    elif name == 'sin' and arg == ZERO:
        return ZERO
    elif name == 'cos' and arg == ZERO:
        return ONE
    elif name == 'abs' and isinstance(arg, Number):
        return Number(abs(arg.value))
    return Call(name, arg)


def ln(x):
    return call('ln', x)


def exp(x):
    return call('exp', x)


def sqrt(x):
    return call('sqrt', x)


# Rewriting


def substitute(e, bindings=None, fbindings=None):
    """
    Simultaneous, capture-free replacement of symbols by expressions
    and of unknown functions by (formal arguments, body) pairs. A
    function application of derivative order n is replaced by the
    n-th derivative of the body.
    """
    bindings = {
        (k.name if isinstance(k, Symbol) else k): as_expr(v)
        for k, v in (bindings or {}).items()
    }
    fbindings = {
        name: normalize_fbinding(name, spec)
        for name, spec in (fbindings or {}).items()
    }
    memo = {}

    def walk(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Number):
            res = node
        elif isinstance(node, Symbol):
            res = bindings.get(node.name, node)
        elif type(node) is Add:
            res = add(*(walk(a) for a in node.args))
        elif type(node) is Mul:
            res = mul(*(walk(a) for a in node.args))
        elif isinstance(node, Pow):
            res = power(walk(node.base), walk(node.exp))
        elif isinstance(node, Call):
            res = call(node.name, walk(node.arg))
        else:
            args = [walk(a) for a in node.args]
            if node.name in fbindings:
                res = apply_fbinding(node, args, *fbindings[node.name])
            else:
                res = FuncApp(node.name, args, node.orders)
        memo[node] = res
        return res

    return walk(as_expr(e))


def normalize_fbinding(name, spec):
    formals, body = spec
    if isinstance(formals, (str, Symbol)):
        formals = (formals,)
    formals = tuple(f.name if isinstance(f, Symbol) else f for f in formals)
    return formals, as_expr(body)


def apply_fbinding(node, args, formals, body):
    if len(formals) != len(args):
        raise ArityError(
            'Function "%s" bound with %s argument(s), applied to %s' % (
                node.name, len(formals), len(args)))
    res = body
    for formal, order in zip(formals, node.orders):
        for _ in range(order):
            res = differentiate(res, formal)
    return substitute(res, dict(zip(formals, args)))


def simplify(e):
    e = as_expr(e)
    for _ in range(MAX_PASSES):
        new = substitute(e)
        if new == e:
            return new
        e = new
    return e


def differentiate(e, var, signs=None):
    """
    Exact derivative of e with respect to the symbol var. Absolute
    values are only differentiable when signs maps their argument to
    +1 or -1.
    """
    if isinstance(var, Symbol):
        var = var.name
    signs = {as_expr(k): v for k, v in (signs or {}).items()}
    memo = {}

    def d(node):
        if not node.has(var):
            return ZERO
        if node in memo:
            return memo[node]
        if isinstance(node, Symbol):
            res = ONE
        elif type(node) is Add:
            res = add(*(d(a) for a in node.args))
        elif type(node) is Mul:
            args = node.args
            res = add(*(
                mul(*(args[:i] + (d(a),) + args[i + 1:]))
                for i, a in enumerate(args) if a.has(var)
            ))
        elif isinstance(node, Pow):
            b, k = node.base, node.exp
            if not k.has(var):
                res = mul(k, power(b, add(k, MINUS_ONE)), d(b))
            elif not b.has(var):
                res = mul(node, call('ln', b), d(k))
            else:
                res = mul(node, add(mul(d(k), call('ln', b)),
                                    mul(k, d(b), power(b, MINUS_ONE))))
        elif isinstance(node, Call):
            res = mul(call_derivative(node, signs), d(node.arg))
        else:
            res = add(*(
                mul(node.derivative(i), d(a))
                for i, a in enumerate(node.args) if a.has(var)
            ))
        memo[node] = res
        return res

    return d(as_expr(e))


def call_derivative(node, signs):
    arg = node.arg
    if node.name == 'ln':
        return power(arg, MINUS_ONE)
    if node.name == 'exp':
        return node
    if node.name == 'sin':
        return call('cos', arg)
    if node.name == 'cos':
        return neg(call('sin', arg))
    if node.name == 'sqrt':
        return mul(HALF, power(arg, Number(Fraction(-1, 2))))
    # abs
    if arg in signs:
        return Number(signs[arg])
    raise DerivativeError('unsigned abs derivative (%s)' % to_text(node))


def resolve_abs(e, signs):
    """
    Replace abs(g) by g or -g according to the sign recorded for g.
    """
    signs = {as_expr(k): v for k, v in (signs or {}).items()}
    if not signs:
        return as_expr(e)
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
            arg = walk(node.arg)
            if node.name == 'abs' and node.arg in signs:
                res = mul(Number(signs[node.arg]), arg)
            else:
                res = call(node.name, arg)
        else:
            res = FuncApp(node.name, map(walk, node.args), node.orders)
        memo[node] = res
        return res

    return walk(as_expr(e))


def functions(e):
    found = set()
    stack = [as_expr(e)]
    while stack:
        node = stack.pop()
        if isinstance(node, FuncApp):
            found.add(node.name)
            stack.extend(node.args)
        elif isinstance(node, Add):
            stack.extend(node.args)
        elif isinstance(node, Pow):
            stack.extend((node.base, node.exp))
        elif isinstance(node, Call):
            stack.append(node.arg)
    return found


def polynomial(e, gens):
    """
    Coefficients of e seen as a polynomial in the symbols gens, as a
    dict mapping exponent tuples to expressions free of gens.
    """
    gens = tuple(g.name if isinstance(g, Symbol) else g for g in gens)
    gen_set = set(gens)
    zero = (0,) * len(gens)

    def times(left, right):
        res = {}
        for ka, va in left.items():
            for kb, vb in right.items():
                k = tuple(a + b for a, b in zip(ka, kb))
                res[k] = add(res.get(k, ZERO), mul(va, vb))
        return res

    def walk(node):
        if not (node.free_symbols() & gen_set):
            return {zero: node}
        if isinstance(node, Symbol):
            return {tuple(int(g == node.name) for g in gens): ONE}
        if type(node) is Add:
            res = {}
            for a in node.args:
                for k, v in walk(a).items():
                    res[k] = add(res.get(k, ZERO), v)
            return res
        if type(node) is Mul:
            res = {zero: ONE}
            for a in node.args:
                res = times(res, walk(a))
            return res
        if (isinstance(node, Pow) and isinstance(node.exp, Number)
                and node.exp.is_integer() and node.exp.value > 0):
            res = {zero: ONE}
            base = walk(node.base)
            for _ in range(int(node.exp.value)):
                res = times(res, base)
            return res
        raise SymredError('Expression is not polynomial in %s: %s' % (
            ', '.join(gens), to_text(node)))

    res = walk(as_expr(e))
    return {k: v for k, v in res.items() if v != ZERO}


# Numeric evaluation


class Env:
    """
    Numeric bindings: symbol values and unknown-function callables. A
    function entry is either a callable or a sequence of callables
    giving the successive derivatives.
    """

    def __init__(self, values=None, funcs=None):
        self.values = dict(values or {})
        self.funcs = dict(funcs or {})

    def bind(self, values=None, funcs=None):
        return Env(dict(self.values, **(values or {})),
                   dict(self.funcs, **(funcs or {})))

    def value(self, name):
        try:
            return self.values[name]
        except KeyError:
            raise UnboundError('Unbound symbol "%s"' % name)

    def call(self, name, orders, args):
        try:
            entry = self.funcs[name]
        except KeyError:
            raise UnboundError('Unbound function "%s"' % name)
        if callable(entry):
            base, table = entry, ()
        else:
            base, table = entry[0], entry
        if len(args) == 1 and orders[0] < len(table):
            return table[orders[0]](*args)
        return finite_difference(base, orders)(*args)


def finite_difference(fn, orders):
    orders = list(orders)
    idx = next((i for i, o in enumerate(orders) if o), None)
    if idx is None:
        return fn
    h = fd_step(sum(orders))
    orders[idx] -= 1
    inner = finite_difference(fn, orders)

    def deriv(*xs):
        up, down = list(xs), list(xs)
        up[idx] += h
        down[idx] -= h
        return (inner(*up) - inner(*down)) / (2 * h)

    return deriv


def evaluate(e, env=None):
    env = env or Env()
    memo = {}

    def ev(node):
        if node in memo:
            return memo[node]
        if isinstance(node, Number):
            res = float(node.value)
        elif isinstance(node, Symbol):
            res = float(env.value(node.name))
        elif type(node) is Add:
            res = math.fsum(ev(a) for a in node.args)
        elif type(node) is Mul:
            res = 1.0
            for a in node.args:
                res *= ev(a)
        elif isinstance(node, Pow):
            res = eval_pow(node, ev(node.base), ev(node.exp))
        elif isinstance(node, Call):
            res = eval_call(node, ev(node.arg))
        else:
            res = float(env.call(node.name, node.orders,
                                 [ev(a) for a in node.args]))
        if not math.isfinite(res):
            raise DomainError('non-finite value', to_text(node))
        memo[node] = res
        return res

    try:
        return ev(as_expr(e))
    except (OverflowError, ZeroDivisionError) as exc:
        raise DomainError(str(exc), to_text(e))


def eval_pow(node, base, k):
    integral = isinstance(node.exp, Number) and node.exp.is_integer()
    if base == 0 and k <= 0:
        raise DomainError('division by zero', to_text(node))
    if base < 0 and not integral:
        raise DomainError('fractional power of a negative value',
                          to_text(node))
    if integral:
        return base ** int(node.exp.value)
    return base ** k


def eval_call(node, x):
    name = node.name
    if name == 'ln':
        if x <= 0:
            raise DomainError('ln of a non-positive value', to_text(node))
        return math.log(x)
    if name == 'sqrt':
        if x < 0:
            raise DomainError('sqrt of a negative value', to_text(node))
        return math.sqrt(x)
    if name == 'exp':
        return math.exp(x)
    if name == 'sin':
        return math.sin(x)
    if name == 'cos':
        return math.cos(x)
    return abs(x)


def sample_env(names, domain, rng, env=None):
    values = {}
    for name in sorted(names):
        try:
            lo, hi = domain[name]
        except KeyError:
            raise UnboundError('No sampling interval for "%s"' % name)
        values[name] = float(rng.uniform(lo, hi))
    return (env or Env()).bind(values)


def close(a, b, tol):
    return abs(a - b) <= tol * (1 + max(abs(a), abs(b)))


def equivalent(e1, e2, domain=None, trials=30, tol=1e-9, rng=None,
               env=None, max_retries=None):
    """
    Randomized zero test of e1 - e2: both sides are evaluated at
    `trials` points drawn from the per-symbol intervals of `domain`.
    """
    e1, e2 = as_expr(e1), as_expr(e2)
    env = env or Env()
    domain = domain or {}
    if rng is None:
        rng = numpy.random.default_rng(setting('seed'))
    names = (e1.free_symbols() | e2.free_symbols()) - set(env.values)
    max_retries = max_retries or 10 * trials
    done = failures = 0
    while done < trials:
        point = sample_env(names, domain, rng, env)
        try:
            v1, v2 = evaluate(e1, point), evaluate(e2, point)
        except DomainError:
            failures += 1
            if failures > max_retries:
                raise DomainError(
                    'sampling exhausted after %s domain violations' %
                    failures)
            continue
        if not close(v1, v2, tol):
            return False
        done += 1
    return True


# Printing

PREC_ADD, PREC_MUL, PREC_POW, PREC_ATOM = 1, 2, 3, 4


def precedence(e):
    if isinstance(e, Number):
        v = e.value
        if v < 0:
            return PREC_ADD
        return PREC_ATOM if v.denominator == 1 else PREC_MUL
    if type(e) is Add:
        return PREC_ADD
    if type(e) is Mul:
        return PREC_MUL
    if isinstance(e, Pow):
        return PREC_POW
    return PREC_ATOM


def wrap(e, level):
    text = to_text(e)
    if precedence(e) < level:
        return '(%s)' % text
    return text


def number_text(value):
    if value.denominator == 1:
        return str(value.numerator)
    return '%s/%s' % (value.numerator, value.denominator)


def to_text(e):
    e = as_expr(e)
    if isinstance(e, Number):
        return number_text(e.value)
    if isinstance(e, Symbol):
        return e.name
    if type(e) is Add:
        parts = [to_text(e.args[0])]
        for term in e.args[1:]:
            c, rest = split_coeff(term)
            if c < 0:
                parts.append(' - ' + wrap(scaled(-c, rest), PREC_MUL))
            else:
                parts.append(' + ' + wrap(term, PREC_MUL))
        return ''.join(parts)
    if type(e) is Mul:
        return mul_text(e)
    if isinstance(e, Pow):
        exp = e.exp
        if isinstance(exp, Symbol) or (
                isinstance(exp, Number) and exp.is_integer()
                and exp.value >= 0):
            exp_text = to_text(exp)
        else:
            exp_text = '(%s)' % to_text(exp)
        return '%s^%s' % (wrap(e.base, PREC_ATOM), exp_text)
    if isinstance(e, Call):
        return '%s(%s)' % (e.name, to_text(e.arg))
    return funcapp_text(e)


def mul_text(e):
    coeff, rest = split_coeff(e)
    factors = rest.args if type(rest) is Mul else (rest,)
    num, den = [], []
    for f in factors:
        if (isinstance(f, Pow) and isinstance(f.exp, Number)
                and f.exp.value < 0):
            den.append(power(f.base, Number(-f.exp.value)))
        else:
            num.append(f)
    num_text = '*'.join(wrap(f, PREC_POW) for f in num)
    if coeff == -1 and num and not isinstance(num[0], Pow):
        num_text = '-' + num_text
    elif coeff != 1:
        prefix = number_text(coeff)
        num_text = prefix + ('*' + num_text if num_text else '')
    elif not num_text:
        num_text = '1'
    if not den:
        return num_text
    if len(den) == 1:
        den_text = wrap(den[0], PREC_ATOM)
    else:
        den_text = '(%s)' % '*'.join(wrap(f, PREC_POW) for f in den)
    if num_text[-1].isdigit() and den_text[0].isdigit():
        num_text = '(%s)' % num_text
    return '%s/%s' % (num_text, den_text)


def funcapp_text(e):
    args = ', '.join(to_text(a) for a in e.args)
    if not any(e.orders):
        return '%s(%s)' % (e.name, args)
    if len(e.args) == 1:
        n = e.orders[0]
        if n >= 2 and isinstance(e.args[0], Symbol):
            return 'Diff(%s, %s, %s)' % (e.name, e.args[0].name, n)
        return '%s%s(%s)' % (e.name, "'" * n, args)
    orders = ', '.join(str(o) for o in e.orders)
    return 'Diff(%s(%s), %s)' % (e.name, args, orders)


# Parsing

TOKEN_RE = re.compile(r'''
    (?P<space>\s+)
  | (?P<ratio>\d+/\d+(?![\d.]))
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),'])
''', re.VERBOSE)


def tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        match = TOKEN_RE.match(text, pos)
        if not match:
            raise ExprSyntaxError('unexpected character %r' % text[pos], pos)
        kind = match.lastgroup
        if kind != 'space':
            tokens.append((kind, match.group(), pos))
        pos = match.end()
    tokens.append(('end', '', len(text)))
    return tokens


def atom(token):
    "Numbers become Number, identifiers Symbol"
    kind, text, _ = token
    if kind == 'ratio':
        num, den = text.split('/')
        if int(den) == 0:
            raise ExprSyntaxError('zero denominator', token[2])
        return Number(Fraction(int(num), int(den)))
    if kind == 'number':
        return Number(Fraction(text))
    return Symbol(text)


class Reader:
    """
    Recursive descent reader for the grammar:

        expr   := term (("+"|"-") term)*
        term   := factor (("*"|"/") factor)*
        factor := unary ("^" factor)?
        unary  := "-" unary | base
        base   := NUMBER | IDENT | IDENT "'"* "(" expr ("," expr)* ")"
                | "Diff" "(" IDENT "," IDENT "," INT ")" | "(" expr ")"
    """

    def __init__(self, text):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text):
        token = self.next()
        if token[1] != text:
            self.fail(token, 'expected "%s"' % text)
        return token

    def fail(self, token, msg=None):
        if token[0] == 'end':
            raise ExprSyntaxError('unexpected EOF while reading', token[2])
        raise ExprSyntaxError(msg or 'unexpected "%s"' % token[1], token[2])

    def read(self):
        res = self.read_expr()
        token = self.peek()
        if token[0] != 'end':
            self.fail(token)
        return res

    def read_expr(self):
        res = self.read_term()
        while self.peek()[1] in ('+', '-'):
            op = self.next()[1]
            right = self.read_term()
            res = add(res, right) if op == '+' else sub(res, right)
        return res

    def read_term(self):
        res = self.read_factor()
        while self.peek()[1] in ('*', '/'):
            op = self.next()[1]
            right = self.read_factor()
            if op == '*':
                res = mul(res, right)
            else:
                res = mul(res, power(right, MINUS_ONE))
        return res

    def read_factor(self):
        base = self.read_unary()
        if self.peek()[1] == '^':
            self.next()
            return power(base, self.read_factor())
        return base

    def read_unary(self):
        if self.peek()[1] == '-':
            self.next()
            return neg(self.read_unary())
        return self.read_base()

    def read_base(self):
        token = self.next()
        kind, text, offset = token
        if kind in ('ratio', 'number'):
            return atom(token)
        if text == '(':
            res = self.read_expr()
            self.expect(')')
            return res
        if kind != 'ident':
            self.fail(token)
        primes = 0
        while self.peek()[1] == "'":
            self.next()
            primes += 1
        if self.peek()[1] != '(':
            if primes:
                self.fail(self.peek(), 'expected "("')
            return atom(token)
        if text == 'Diff' and not primes:
            return self.read_diff()
        self.next()
        args = [self.read_expr()]
        while self.peek()[1] == ',':
            self.next()
            args.append(self.read_expr())
        self.expect(')')
        if text[0].islower():
            if text not in BUILTINS:
                raise ExprSyntaxError('unknown builtin "%s"' % text, offset)
            if primes or len(args) != 1:
                raise ExprSyntaxError(
                    'builtin "%s" takes one argument' % text, offset)
            return call(text, args[0])
        if primes and len(args) != 1:
            raise ExprSyntaxError(
                'prime notation needs a single argument', offset)
        orders = (primes,) if primes else None
        return FuncApp(text, args, orders)

    def read_diff(self):
        self.expect('(')
        name = self.next()
        if name[0] != 'ident':
            self.fail(name, 'expected a function name')
        if self.peek()[1] == '(':
            return self.read_partial(name[1])
        self.expect(',')
        var = self.next()
        if var[0] != 'ident':
            self.fail(var, 'expected a variable name')
        self.expect(',')
        order = self.read_order()
        self.expect(')')
        return FuncApp(name[1], [Symbol(var[1])], (order,))

    def read_partial(self, name):
        # Diff(F(t, x), 1, 0): one order per argument
        self.next()
        args = [self.read_expr()]
        while self.peek()[1] == ',':
            self.next()
            args.append(self.read_expr())
        self.expect(')')
        orders = []
        for _ in args:
            self.expect(',')
            orders.append(self.read_order())
        self.expect(')')
        return FuncApp(name, args, orders)

    def read_order(self):
        order = self.next()
        if order[0] != 'number' or not order[1].isdigit():
            self.fail(order, 'expected an integer order')
        return int(order[1])


def parse(text):
    return Reader(text).read()
