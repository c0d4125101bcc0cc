from fractions import Fraction

import pytest

from symred.context import (DerivativeError, DomainError, ExprSyntaxError,
                            UnboundError)
from symred.expression import (Env, FuncApp, Number, Symbol, as_expr,
                               differentiate, equivalent, evaluate, fd_step,
                               functions, parse, polynomial, resolve_abs,
                               simplify, substitute, to_text)


def test_parse_precedence():
    assert parse('1 + 2*x^2') == parse('2*(x^2) + 1')
    assert parse('x/y/z') == parse('x*y^(-1)*z^(-1)')
    assert parse('2^3^2') == Number(512)
    # unary minus binds tighter than ^
    assert parse('-x^2') == parse('x^2')
    assert parse('-(x^2)') == parse('-1*x^2')


def test_parse_numbers():
    assert parse('1/3') == Number(Fraction(1, 3))
    assert parse('0.25') == Number(Fraction(1, 4))
    assert parse('1e-3') == Number(Fraction(1, 1000))
    assert as_expr(0.1) == Number(Fraction('0.1'))


def test_parse_functions():
    e = parse("F'(xi) + Diff(G, t, 2)")
    assert functions(e) == {'F', 'G'}
    assert FuncApp('F', [Symbol('xi')], (1,)) in e.args
    assert parse('exp(ln(x))') == Symbol('x')
    assert parse('sqrt(x)') == parse('x^(1/2)')


def test_partial_derivative_text():
    e = FuncApp('F', [Symbol('t'), Symbol('x')], (1, 0))
    assert to_text(e) == 'Diff(F(t, x), 1, 0)'
    assert parse(to_text(e)) == e
    e = parse('Diff(G(t, x^2), 0, 2)')
    assert e == FuncApp('G', [Symbol('t'), parse('x^2')], (0, 2))
    assert parse(to_text(e)) == e
    with pytest.raises(ExprSyntaxError):
        parse('Diff(F(t, x), 1)')


@pytest.mark.parametrize('text, offset', [
    ('x +', 3),
    ('x + * y', 4),
    ('foo(x)', 0),
    ('(x', 2),
    ('x $ y', 2),
])
def test_parse_errors(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset
    assert 'offset %s' % offset in str(info.value)


def test_normal_form():
    assert parse('x + x') == parse('2*x')
    assert parse('x*y - y*x') == Number(0)
    assert parse('x^2*x^3') == parse('x^5')
    assert parse('exp(x)*exp(y)') == parse('exp(x + y)')
    assert parse('0*ln(x)') == Number(0)


def test_substitute_simultaneous():
    e = parse('x + 2*y')
    assert substitute(e, {'x': 'y', 'y': 'x'}) == parse('y + 2*x')
    assert substitute(e, {'y': 0}) == Symbol('x')


def test_substitute_functions():
    e = parse("F''(t) + F(t)")
    res = substitute(e, fbindings={'F': ('s', 'sin(s)')})
    assert simplify(res) == Number(0)
    res = substitute(parse("F'(x^2)"), fbindings={'F': ('s', 's^3')})
    assert res == parse('3*x^4')


def test_differentiate():
    assert differentiate(parse('x^3'), 'x') == parse('3*x^2')
    assert differentiate(parse('ln(x)'), 'x') == parse('1/x')
    assert differentiate(parse('y*exp(2*x)'), 'x') == parse('2*y*exp(2*x)')
    assert differentiate(parse('sin(x)'), 'y') == Number(0)
    e = parse('x^y')
    assert equivalent(differentiate(e, 'y'), parse('x^y*ln(x)'),
                      domain={'x': (0.5, 2), 'y': (-1, 1)})


def test_differentiate_chain_rule_on_functions():
    e = parse('F(t*x)')
    d = differentiate(e, 'x')
    assert d == parse("t*F'(t*x)")


def test_abs_needs_a_sign():
    e = parse('abs(x - 1)')
    with pytest.raises(DerivativeError):
        differentiate(e, 'x')
    assert differentiate(e, 'x', signs={'x - 1': -1}) == Number(-1)
    assert resolve_abs(e, {'x - 1': 1}) == parse('x - 1')
    assert equivalent(resolve_abs(e, {'x - 1': -1}), '1 - x',
                      domain={'x': (-2.0, 2.0)})


def test_evaluate():
    env = Env({'x': 4.0, 'y': 0.5})
    assert evaluate(parse('sqrt(x) + y'), env) == 2.5
    assert evaluate(parse('x^(-1)'), env) == 0.25
    assert evaluate(parse('x^3'), Env({'x': -2.0})) == -8.0
    env = Env({'t': 2.0}, {'F': lambda v: v * v})
    assert evaluate(parse('F(t) + 1'), env) == 5.0
    # derivative of an unknown function by finite differences
    assert abs(evaluate(parse("F'(t)"), env) - 4.0) < 1e-6


def test_fd_step():
    assert fd_step(1) == 1e-5
    # nested stencils widen with the order
    assert abs(fd_step(2) - 1e-5 ** 0.75) < 1e-15
    assert abs(fd_step(3) - 1e-3) < 1e-12
    env = Env({'t': 1.0}, {'F': lambda v: v ** 4})
    assert abs(evaluate(parse("Diff(F, t, 2)"), env) - 12.0) < 1e-5


@pytest.mark.parametrize('text, value', [
    ('ln(x)', -1.0),
    ('sqrt(x)', -1.0),
    ('x^(1/3)', -8.0),
    ('1/x', 0.0),
    ('exp(x)', 1e6),
])
def test_evaluate_domain(text, value):
    with pytest.raises(DomainError):
        evaluate(parse(text), Env({'x': value}))


def test_evaluate_unbound():
    with pytest.raises(UnboundError):
        evaluate(parse('x + y'), Env({'x': 1.0}))
    with pytest.raises(UnboundError):
        evaluate(parse('G(x)'), Env({'x': 1.0}))


def test_equivalent(rng):
    domain = {'x': (0.5, 2.0)}
    assert equivalent('(x + 1)^2', 'x^2 + 2*x + 1', domain=domain, rng=rng)
    assert equivalent('sin(x)^2 + cos(x)^2', '1', domain=domain, rng=rng)
    assert not equivalent('(x + 1)^2', 'x^2 + 1', domain=domain, rng=rng)
    with pytest.raises(DomainError):
        equivalent('ln(x)', 'ln(x)', domain={'x': (-2.0, -1.0)}, rng=rng)


def test_polynomial():
    coeffs = polynomial(parse('a*x^2 + b*x*y + 3'), ['x', 'y'])
    assert coeffs == {
        (2, 0): Symbol('a'),
        (1, 1): Symbol('b'),
        (0, 0): Number(3),
    }


def test_to_text():
    for text in ('x^2 + 1', 'p*ln(x) + C2', "F'(xi)", 'exp(-2*t)',
                 '(x + 1)^(-3/2)', 'C3/(x + C1)'):
        e = parse(text)
        assert parse(to_text(e)) == e
    assert to_text(parse('x - 2*y')) == 'x - 2*y'
