import math

import numpy
import pytest

from symred.context import SymredError
from symred.expression import Number, differentiate, equivalent, substitute
from symred.liealg import (CHART_DOMAIN, FLOW_PARAM, PARAM_DOMAIN, NormalForm,
                           ad_matrix, bch_conjugate, bracket_table,
                           closure_residual, conjugate_to, direct_sum_witness,
                           flow, get_case, golden_class, golden_list,
                           normalize, parse_element, ray_orbit_dim,
                           search_orbit, two_a2_witness)

CASES = ('I', 'II', 'III', 'IV', 'V')


def test_brackets_case_one():
    case = get_case('I')
    assert set(bracket_table(case)) == {
        ('X1', 'X3', 'X1'),
        ('X2', 'X3', 'X2'),
        ('X2', 'X4', 'X2'),
    }


def test_brackets_case_three():
    case = get_case('III')
    consts = case.constants()
    # [X2, X4] = X2, [X2, X5] = 2 X4, [X4, X5] = X5
    assert consts[1][3][1] == Number(1)
    assert consts[1][4][3] == Number(2)
    assert consts[3][4][4] == Number(1)
    assert ('X2', 'X5', '2*X4') in set(bracket_table(case))
    assert closure_residual(case, 1, 4).is_zero()


def test_full_table_is_antisymmetric():
    case = get_case('I')
    rows = dict(((a, b), text) for a, b, text in bracket_table(
        case, nonzero=False))
    assert len(rows) == case.dim ** 2
    assert rows['X1', 'X1'] == '0'
    assert rows['X3', 'X1'] == '-X1'


@pytest.mark.parametrize('case_id', CASES)
def test_jacobi(case_id):
    c = get_case(case_id).numeric_constants()
    n = c.shape[0]
    for i in range(n):
        for j in range(n):
            assert numpy.allclose(c[i, j], -c[j, i])
            for k in range(n):
                jac = (c[j, k] @ c[i] + c[k, i] @ c[j] + c[i, j] @ c[k])
                assert numpy.allclose(jac, 0, atol=1e-12)


def test_unknown_case():
    with pytest.raises(SymredError):
        get_case('VI')


def test_parse_element():
    case = get_case('I')
    X = parse_element(case, '5*X1 + 7*X2 + X3 + 2*X4')
    assert list(X.coeffs) == [5, 7, 1, 2]
    assert X['X4'] == 2
    assert str(parse_element(case, 'X1 - X2')) == 'X1 - X2'
    for text in ('X7', 'X1*X2', 'X1 + 1'):
        with pytest.raises(SymredError):
            parse_element(case, text)


def test_classify():
    case = get_case('I')
    res = normalize(case, parse_element(case, '5*X1 + 7*X2 + X3 + 2*X4'))
    assert res.label == '{X3+aX4}'
    assert abs(res.params['a'] - 2) < 1e-9
    assert str(res) == '{X3+aX4}, a=2.000000'
    res = normalize(case, parse_element(case, 'X1'))
    assert res.label == '{X1}'
    assert res.orbit == '{X1}'
    with pytest.raises(SymredError):
        normalize(case, case.element([0, 0, 0, 0]))


@pytest.mark.parametrize('label, params', [
    ('{X1}', {}),
    ('{X4}', {}),
    ('{X2}', {}),
    ('{X3+aX4}', {'a': 2.0}),
    ('{X4-X3+εX2}', {'sgn': 1.0}),
    ('{X1+εX2}', {'sgn': -1.0}),
    ('{X1+εX4}', {'sgn': 1.0}),
])
def test_printed_forms_are_fixed(label, params):
    case = get_case('I')
    g = golden_class(case, label)
    res = normalize(case, g.representative(params))
    assert res.label == label
    assert res.params == params


@pytest.mark.parametrize('case_id, text, orbit, a', [
    ('I', 'X3 + 2*X4', '{X3+aX4}', 2.0),
    ('II', 'X3 + 2*X4', '{X3+aX4}', 2.0),
    ('III', 'X3 + 2*X4', '{X3+aX4}', 2.0),
    ('IV', 'X5 + 0.5*X6 + X1', '{X5+aX6}', 0.5),
    ('V', 'X5 + 0.5*X6 + X1', '{X5+aX6}', 0.5),
])
def test_classify_is_conjugation_invariant(case_id, text, orbit, a, rng):
    case = get_case(case_id)
    X = parse_element(case, text)
    for _ in range(5):
        Y = case.element(rng.uniform(-1, 1, case.dim))
        res = normalize(case, bch_conjugate(Y, X))
        assert res.orbit == orbit
        assert abs(res.orbit_params['a'] - a) < 1e-9


@pytest.mark.parametrize('case_id', CASES)
def test_normalize_is_idempotent(case_id, rng):
    case = get_case(case_id)
    for g in golden_list(case, extra=True):
        params = g.sample(rng)
        res = normalize(case, g.representative(params))
        assert res.label == g.label
        assert set(res.params) == set(params)
        for name, value in params.items():
            if name == 'sgn':
                assert res.params[name] == value
            else:
                assert abs(res.params[name] - value) < 1e-9


@pytest.mark.parametrize('case_id', CASES)
def test_conjugation_is_an_automorphism(case_id, rng):
    case = get_case(case_id)

    def bracket(A, B):
        return case.element(ad_matrix(A) @ B.coeffs)

    for _ in range(5):
        Y, A, B = [case.element(rng.uniform(-1, 1, case.dim))
                   for _ in range(3)]
        lhs = bch_conjugate(Y, bracket(A, B))
        rhs = bracket(bch_conjugate(Y, A), bch_conjugate(Y, B))
        assert lhs.allclose(rhs)


def test_conjugate_to():
    case = get_case('I')
    target = parse_element(case, 'X1 + X4')
    X = bch_conjugate(parse_element(case, '0.5*X2'), target)
    assert X.allclose(parse_element(case, 'X1 + 0.5*X2 + X4'))
    assert conjugate_to(case, X, target)
    # the sign of the X1 coefficient is an invariant
    assert not conjugate_to(case, X, parse_element(case, 'X1 - X4'))


def test_ray_orbit_dim():
    case = get_case('I')
    dims = [ray_orbit_dim(parse_element(case, text))
            for text in ('X1', 'X1 + X2', 'X1 + X4', 'X4 - X3 + X2')]
    assert dims == [1, 2, 3, 3]


def test_search_orbit():
    case = get_case('I')
    X = parse_element(case, 'X1 + 0.5*X2 + X4')
    res = NormalForm(case)
    search_orbit(res, X)
    # {X1+εX2} lies in the closure of this orbit and is tried later
    assert res.orbit == '{X1+εX4}'
    assert res.orbit_params == {'sgn': 1.0}
    assert res.conjugator[0][0] == 'search'


def test_classify_semi_direct():
    case = get_case('IV')
    res = normalize(case, parse_element(case, 'X5 + 0.5*X6 + X4'))
    assert res.label == '{X5+aX6+εX4}'
    assert res.params == {'a': 0.5, 'sgn': 1.0}
    assert str(res).startswith('L')
    # X4 is removed by conjugation for this value of a
    assert res.orbit == '{X5+aX6}'
    assert res.notes


def test_golden_lists():
    assert len(golden_list('I')) == 7
    assert len(golden_list('III')) == 11
    assert len(golden_list('III', extra=True)) == 14
    assert len(golden_list('IV')) == 63
    case = get_case('IV')
    assert golden_class(case, 'L1').label == '{X1}'
    with pytest.raises(SymredError):
        golden_class(case, '{X9}')


@pytest.mark.parametrize('case_id', ['IV', 'V'])
def test_bch_dilation(case_id, rng):
    case = get_case(case_id)
    X1 = case.basis_element('X1')
    Y = case.basis_element('X5') * 0.7
    res = bch_conjugate(Y, X1)
    assert abs(res['X1'] - math.exp(-0.7)) < 1e-12
    assert res.allclose(X1 * math.exp(-0.7))
    # truncated series
    assert abs(bch_conjugate(Y, X1, order=1)['X1'] - 0.3) < 1e-12
    for zeta in rng.uniform(-2, 2, 100):
        Y = case.basis_element('X5') * zeta
        res = bch_conjugate(Y, X1)
        assert abs(res['X1'] - math.exp(-zeta)) < 1e-10
        assert res.allclose(X1 * math.exp(-zeta))


def test_two_a2_witness():
    names, res = two_a2_witness('I')
    assert names == ['Y1', 'Y2', 'Y3', 'Y4']
    assert numpy.allclose(res['Y1', 'Y2'], [1, 0, 0, 0])
    assert numpy.allclose(res['Y3', 'Y4'], [0, 0, 1, 0])
    for a in ('Y1', 'Y2'):
        for b in ('Y3', 'Y4'):
            assert numpy.allclose(res[a, b], 0)
    with pytest.raises(SymredError):
        two_a2_witness('III')


def test_direct_sum_witness():
    names, res = direct_sum_witness('III')
    assert numpy.allclose(res['X1', 'Z'], [1, 0, 0, 0, 0])
    assert numpy.allclose(res['X2', 'X5'], [0, 0, 0, 2, 0])
    for a in ('X1', 'Z'):
        for b in ('X2', 'X4', 'X5'):
            assert numpy.allclose(res[a, b], 0)


def test_flows():
    domain = {'x': (0.5, 2.0), 'u0': (0.5, 2.0), 'u1': (0.5, 2.0),
              'p': (0.5, 2.0), 's': (-2.0, 1.0)}
    res = flow('I', 'X4', 0.3)
    assert equivalent(res['x'], 'x*exp(3/10)', domain=domain)
    assert equivalent(res['u0'], 'u0 + 3/5*p', domain=domain)
    assert equivalent(res['u1'], 'u1*exp(3/5*s)', domain=domain)
    res = flow('III', 'X5', 0.1)
    assert equivalent(res['x'], 'x/(1 - x/10)', domain=domain)
    # group law along x
    twice = flow('III', 'X5', 0.2)
    again = substitute(res['x'], {'x': res['x']})
    assert equivalent(again, twice['x'], domain=domain)
    with pytest.raises(SymredError):
        flow('I', 'X9', 0.1)


@pytest.mark.parametrize('case_id', CASES)
def test_flow_generators(case_id, rng):
    # d/dsigma of the flow at sigma=0 gives back the field
    case = get_case(case_id)
    domain = dict(CHART_DOMAIN, **PARAM_DOMAIN)
    for name in case.names:
        res = flow(case, name)
        V = case.basis[name]
        for z in case.chart:
            d = substitute(differentiate(res[z], FLOW_PARAM),
                           {FLOW_PARAM: 0})
            assert equivalent(d, V[z], domain=domain, rng=rng)
