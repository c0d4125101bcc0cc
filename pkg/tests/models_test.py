import pytest

from symred.context import ConstraintError, SymredError
from symred.expression import (Env, Symbol, add, equivalent, evaluate, parse,
                               simplify, substitute)
from symred.models import (CaseSpec, compare_pairs, compatibility,
                           full_residual, generic_pair, get_spec, jet,
                           jet_bindings, jet_domain, jet_parts, order_split,
                           potential_split, printed_pair, residual)

VALUES = {'f0': 2.0, 'lambda0': 0.5, 'p': 1.0, 's': 0.3}


def test_jets():
    assert jet('u0', 1, 2) == Symbol('u0_txx')
    assert jet('v1') == Symbol('v1')
    assert jet_parts('v1_tx') == ('v1', 1, 1)
    assert jet_parts('u0') == ('u0', 0, 0)
    assert jet_parts('t') is None
    with pytest.raises(SymredError):
        jet('w0')


def test_get_spec():
    assert get_spec('iii').id == 'III'
    assert get_spec('IV').potential is not None
    assert get_spec('II').potential is None
    with pytest.raises(SymredError):
        get_spec('VII')


def test_case_spec_check():
    spec = get_spec('I')
    assert spec.check(dict(VALUES)) == VALUES
    with pytest.raises(ConstraintError):
        spec.check(dict(VALUES, p=0))
    with pytest.raises(ConstraintError):
        spec.check({'f0': 1.0, 'p': 1.0})
    with pytest.raises(ConstraintError):
        get_spec('III').check({'f0': 1.0, 'lambda0': 1.0, 'q': 0.0,
                               'p': -0.5})
    with pytest.raises(SymredError):
        CaseSpec('X', 'f0*exp(u0/k)', 'lambda0', ('f0', 'lambda0'))


@pytest.mark.parametrize('case_id', ['I', 'II', 'III'])
def test_order_split_matches_printed(case_id, rng):
    res = compare_pairs(order_split(case_id), printed_pair(case_id), rng=rng)
    assert res == {'E0': True, 'E1': True}


@pytest.mark.parametrize('case_id', ['I', 'II', 'III', 'IV', 'V'])
def test_order_split_matches_generic(case_id, rng):
    res = compare_pairs(order_split(case_id), generic_pair(case_id), rng=rng)
    assert all(res.values())


def test_printed_pair_detects_a_typo(rng):
    machine = order_split('I')
    printed = printed_pair('I')
    printed.residuals['E0'] = add(printed.E0, Symbol('u0_x'))
    res = compare_pairs(machine, printed, rng=rng)
    assert res['E0'] is False
    assert res['E1'] is True
    with pytest.raises(SymredError):
        printed_pair('IV')


@pytest.mark.parametrize('case_id', ['IV', 'V'])
def test_potential_compatibility(case_id, rng):
    pair = potential_split(case_id)
    assert [name for name, _ in pair] == ['P0a', 'P0b', 'P1a', 'P1b']
    c0, c1 = compatibility(pair)
    split = order_split(case_id)
    for mine, other in ((c0, split.E0), (c1, split.E1)):
        assert equivalent(mine, other, domain=jet_domain(add(mine, other)),
                          rng=rng)
    with pytest.raises(SymredError):
        potential_split('I')


def test_full_residual():
    domain = {'x': (0.5, 2.0), 't': (0.5, 2.0), 'p': (0.5, 2.0),
              'f0': (0.5, 2.0), 'lambda0': (0.5, 2.0), 's': (-1.0, 1.0),
              'eps': (0.0, 0.1)}
    assert equivalent(full_residual('I', 'p*ln(x)'), '0', domain=domain)
    assert not equivalent(full_residual('I', 'x^2'), '0', domain=domain)


def test_residual(rng):
    pair = order_split('I')
    env = Env(VALUES)
    report = residual(pair, {'u0': 'p*ln(x)', 'u1': '0'}, samples=20,
                      rng=rng, env=env)
    assert report.samples == 20
    assert report.ok(1e-9)
    assert report.worst() < 1e-9
    report = residual(pair, {'u0': 'x^2', 'u1': '0'}, samples=5, rng=rng,
                      env=env)
    assert not report.ok(1e-9)
    assert report.max_rel['E0'] > 1e-3
    with pytest.raises(SymredError):
        residual(pair, {'u0': 'x'}, samples=1, rng=rng, env=env)


def test_order_split_remainder_is_quadratic():
    # u0 solves E0, the order-2 coefficient at (t, x) = (0.7, 1.3) is
    # -f0*(2*(x+t) + x)/p - lambda0*(1+s)*s*x^(s-1)
    u0, u1 = 'p*ln(x)', 'x + t'
    pair = order_split('I')
    bindings = jet_bindings([e for _, e in pair], {'u0': u0, 'u1': u1})
    E0, E1 = [simplify(substitute(e, bindings)) for _, e in pair]
    full = full_residual('I', parse('%s + eps*(%s)' % (u0, u1)))
    env = Env(dict(VALUES, t=0.7, x=1.3))

    def remainder(eps):
        point = env.bind({'eps': eps})
        return abs(evaluate(full, point) - evaluate(E0, point)
                   - eps * evaluate(E1, point))

    scaled = [remainder(eps) / eps ** 2 for eps in (1e-2, 1e-3, 1e-4)]
    assert max(scaled) < 4 * min(scaled)
    assert abs(scaled[-1] - 10.76) < 0.05
    assert abs(remainder(1e-2) / remainder(1e-3) - 100) < 10
