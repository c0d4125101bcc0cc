import math

import numpy
import pytest

from symred.context import (CatalogError, ConstraintError, DomainError,
                            NumericsError, SymredError)
from symred.expression import equivalent, parse, to_text
from symred.reduction import apply_ansatz, check_xi_only
from symred.solutions import (Check, QuadratureTable, as_text, build_ansatz,
                              field_residual, implicit_derivatives,
                              instantiate, ledger, load_catalog,
                              push_forward, quadrature_solve,
                              reduction_reports, run_check, summary,
                              system_pair, verify, verify_all)

I1_VALUES = {'f0': 1.0, 'lambda0': 1.0, 'p': 1.0, 's': 0.0,
             'C1': 0.0, 'C2': 0.0, 'C3': 1.0, 'C4': 0.0}
POSITIVE_X = {'x': (0.5, 2.0)}


def closed_form(u0, u1='0', **extra):
    doc = {'case': 'I', 'kind': 'closed-form',
           'fields': {'u0': u0, 'u1': u1}}
    doc.update(extra)
    return Check('T', 'T', doc)


def test_catalog(catalog):
    assert len(catalog) == 27
    assert len(catalog.by_case('III')) == 11
    assert len(catalog.by_case('iv')) == 1
    assert 'I.1' in catalog
    with pytest.raises(CatalogError):
        catalog.get('NOPE')
    with pytest.raises(CatalogError):
        catalog.by_case('Z')


def test_rows(catalog):
    row = catalog.get('I.6').row()
    assert row[:4] == ('I.6', 'I', '{X1+εX2}', 'implicit')
    assert row[4] == 1
    assert row[5] == 'discrepancy,open'
    assert catalog.get('I.1').row()[5] == '-'


def test_variants(catalog):
    entry = catalog.get('I.6')
    check = entry.variant('order-1 equation without dissipation')
    assert check.label == 'I.6 [order-1 equation without dissipation]'
    assert check.kind == 'reduced-ode-only'
    assert check.discrepancy is None
    assert [c.label for c in entry.flagged()] == ['I.6']
    with pytest.raises(CatalogError):
        entry.variant('nope')


def test_combinations(catalog):
    check = catalog.get('II.10').variant('free amplitude, roots 3 and -2')
    assert [dict(c) for c in check.combinations()] == [
        {'s': -2}, {'s': 0.5}]
    # sgn is added as a choice parameter when an expression uses it
    check = catalog.get('I.6').main
    assert check.choice_names() == ['sgn']
    assert len(check.combinations()) == 2
    assert closed_form('p*ln(x)').combinations() == [{}]


def test_draw(catalog, rng):
    check = catalog.get('I.1').main
    values = check.draw(rng)
    assert set(values) == {'f0', 'lambda0', 'p', 's', 'C1', 'C2', 'C3',
                           'C4'}
    assert 0 <= values['C1'] <= 2
    assert values['p'] == round(values['p'], 3)


def test_catalog_validation():
    with pytest.raises(CatalogError):
        Check('T', 'T', {'case': 'I', 'kind': 'closed-form',
                         'fields': {'u0': 'x'}})
    with pytest.raises(CatalogError):
        closed_form('k*x')
    with pytest.raises(CatalogError):
        Check('T', 'T', {'case': 'VII', 'kind': 'closed-form'})
    with pytest.raises(CatalogError):
        Check('T', 'T', {'case': 'I', 'kind': 'guess'})
    with pytest.raises(CatalogError):
        Check('T', 'T', {'case': 'I', 'kind': 'reduced-ode-only'})
    with pytest.raises(CatalogError):
        closed_form('x', params={'C1': True})


def test_instantiate(catalog):
    fields = instantiate(catalog.get('I.1'), I1_VALUES)
    assert 'abs' not in to_text(fields['u0'])
    assert equivalent(fields['u0'], 'ln(x)', domain=POSITIVE_X)
    assert equivalent(fields['u1'], '1/x', domain=POSITIVE_X)
    with pytest.raises(ConstraintError):
        instantiate(catalog.get('I.1'), dict(I1_VALUES, p=0))
    with pytest.raises(ConstraintError):
        instantiate(catalog.get('III.17'), {'C1': 1.0})
    with pytest.raises(SymredError):
        instantiate(catalog.get('I.2'), I1_VALUES)


def test_derived_and_constraints(catalog):
    check = catalog.get('V.pot').variant('explicit fields')
    values = {'f0': 2.0, 'lambda0': 0.0, 'q': 0.0, 'C1': 1.0, 'C2': 1.0}
    res = check.resolve(values)
    assert res['p'] == 0.5
    assert res['s'] == -1.5
    assert abs(res['r1'] - 2) < 1e-12
    assert abs(res['r2'] + 1) < 1e-12
    with pytest.raises(ConstraintError):
        check.resolve(dict(values, lambda0=0.5))


def test_field_residual(catalog, rng):
    fields = instantiate(catalog.get('I.1'), I1_VALUES)
    report = field_residual('I.1', I1_VALUES, fields, samples=20, rng=rng)
    assert report.ok()
    report = field_residual('I.1', I1_VALUES, {'u0': 'x^2', 'u1': '0'},
                            samples=5, rng=rng)
    assert not report.ok()


def test_run_check(rng):
    report = run_check(closed_form('p*ln(x) + C2', params={'C2': [-1, 1]}),
                       rng, samples=10)
    assert report.ok
    assert len(report.draws) == 2
    assert report.samples == 10
    report = run_check(closed_form('x^2'), rng, samples=10)
    assert not report.ok
    assert report.details


def test_verify_closed_form():
    report = verify('I.1', samples=20)
    assert report.status == 'pass'
    assert report.passed
    doc = report.as_dict()
    assert list(doc) == ['id', 'pass', 'status', 'mode', 'case',
                         'subalgebra', 'residuals', 'samples', 'notes',
                         'checks']
    assert doc['residuals']['I.1'] < 1e-9
    res = summary([report])
    assert res['total'] == 1
    assert res['pass'] == 1
    assert res['failed'] == []


def test_verify_discrepancy():
    report = verify('I.6', samples=20)
    assert report.status == 'discrepancy'
    assert report.passed
    found = list(report.discrepancies())
    assert [d['check'] for d in found] == ['I.6']
    assert found[0]['printed_worst'] > found[0]['corrected_worst']
    assert any('fails as printed' in n for n in report.notes())
    assert summary([report])['discrepancies'] == found


def test_verify_is_reproducible():
    one = verify('III.17', samples=10).as_dict()
    two = verify('III.17', samples=10).as_dict()
    assert one == two


def test_implicit_derivatives():
    d1, d2 = implicit_derivatives(parse('F - xi^2'), 'F', 2)
    domain = {'xi': (0.5, 2.0), 'F': (0.5, 2.0)}
    assert equivalent(d1, '2*xi', domain=domain)
    assert equivalent(d2, '2', domain=domain)


def test_quadrature_table():
    table = QuadratureTable('t', lambda phi: 2.0, 0.0, 1.0, (-50, 50))
    assert abs(table.solve(3.0) - 2.5) < 1e-10
    rows = table.tabulate([0.0, 1.0, -1.0])
    assert [v for v, _ in rows] == [-1.0, 0.0, 1.0]
    assert numpy.allclose([F for _, F in rows], [0.5, 1.0, 1.5])
    assert list(table.csv_rows())[0] == 't,F'
    F, d1, d2 = table.derivatives(0.5)
    assert abs(d1 - 0.5) < 1e-8
    assert abs(d2) < 1e-6
    with pytest.raises(NumericsError):
        table.slopes(0.5)
    exact = QuadratureTable('t', lambda phi: 2.0, 0.0, 1.0, (-50, 50),
                            slope=lambda phi: 0.0)
    F, d1, d2 = exact.slopes(0.5)
    assert abs(F - 1.25) < 1e-10
    assert d1 == 0.5
    assert d2 == 0.0
    flat = QuadratureTable('t', lambda phi: 0.0, 0.0, 1.0, (-50, 50))
    with pytest.raises(NumericsError):
        flat.solve(1.0)
    # the solution leaves the bracket
    narrow = QuadratureTable('t', lambda phi: 1.0, 0.0, 0.0, (-1, 1))
    with pytest.raises(NumericsError):
        narrow.solve(5.0)


def test_blow_up_quadrature(catalog):
    check = catalog.get('IV.pot').variant('blow-up profile')
    values = {'K': 0, 'p': 1.0, 'f0': 1.0, 't0': 0.0, 'lambda0': 0.5,
              's': 0.25}
    grid = numpy.linspace(-2, -0.1, 9)
    table = quadrature_solve(check, values, grid)
    assert len(table.rows) == 9
    for t, F in table.rows:
        assert abs(F + 2 * math.log(-t)) < 1e-8
    with pytest.raises(SymredError):
        quadrature_solve(catalog.get('I.1'), I1_VALUES)


@pytest.mark.parametrize('entry_id, variant', [
    ('III.24', None),
    ('IV.pot', None),
    ('IV.pot', 'blow-up profile'),
])
def test_quadrature_checks(catalog, rng, entry_id, variant):
    entry = catalog.get(entry_id)
    check = entry.variant(variant) if variant else entry.main
    report = run_check(check, rng, samples=10)
    assert report.ok
    assert report.worst < 1e-6


def test_ledger(catalog):
    rows = ledger(catalog)
    assert rows
    assert {'entry': 'I.6', 'check': 'I.6',
            'note': 'The exponential term has coefficient p f0, not f0/p.'
            } in [dict(r) for r in rows]


def test_push_forward(catalog, rng):
    values = dict(I1_VALUES, C1=0.5, C2=0.3, s=0.4)
    fields = push_forward('I.1', 'X4', 0.3, values)
    assert list(fields) == ['u0', 'u1']
    report = field_residual('I.1', values, fields, samples=20, rng=rng)
    assert report.ok()

    values = {'f0': 1.0, 'lambda0': 0.5, 'q': 0.2, 'C1': 0.5, 'C2': 1.8,
              'C3': 1.0, 'C4': -1.0}
    fields = push_forward('III.17', 'X5', 0.1, values)
    assert fields['u0'].has('x')
    report = field_residual('III.17', values, fields, samples=20, rng=rng)
    assert report.ok()


def test_push_forward_needs_a_base_flow():
    with pytest.raises(SymredError):
        push_forward('I.1', 'X9', 0.1, I1_VALUES)


CATALOG = load_catalog()
ENTRY_IDS = [entry.id for entry in CATALOG]
# checks whose reductions claim factored equations, corrected forms first
REDUCED_CHECKS = [
    check.label for entry in CATALOG for check in entry.checks
    if any(spec.get('factors') or spec.get('odes')
           for spec in check.reductions)
]


def reduced_check(label):
    for entry in CATALOG:
        for check in entry.checks:
            if check.label == label:
                return check.corrected() if check.discrepancy else check


@pytest.mark.parametrize('entry_id', ENTRY_IDS)
def test_catalog_entry_holds(entry_id):
    report = verify(entry_id)
    assert report.status in ('pass', 'discrepancy')
    # a check failing as printed only passes through its corrected form
    for result in report.results:
        if result.status == 'discrepancy':
            assert not result.printed.ok
            assert result.corrected.ok


def test_catalog_summary():
    res = summary(verify_all(workers=4, samples=20))
    assert res['total'] == 27
    assert res['fail'] == 0
    assert res['pass'] >= 18
    ledgered = set(row['check'] for row in ledger())
    assert set(d['check'] for d in res['discrepancies']) <= ledgered


@pytest.mark.parametrize('label', REDUCED_CHECKS)
def test_reductions_depend_on_xi_only(label, rng):
    check = reduced_check(label)
    values, rows = reduction_reports(check, rng=rng)
    assert rows
    for _, name, report, matched in rows:
        assert report.ok
        assert report.pairs == 10
        assert matched is not False


@pytest.mark.parametrize('label', REDUCED_CHECKS)
def test_reductions_reject_a_wrong_variable(label, rng):
    check = reduced_check(label)
    values, _ = reduction_reports(check, rng=rng)
    pair = system_pair(check.case.id)
    for spec in check.reductions:
        if not (spec.get('factors') or spec.get('odes')):
            continue
        xi = '(%s) + x*t/3' % as_text(spec['xi'])
        ansatz = build_ansatz(check, dict(spec, xi=xi), values)
        oks = []
        for (name, _), R in zip(pair, apply_ansatz(pair, ansatz)):
            if name not in ansatz.factors and name not in ansatz.odes:
                continue
            try:
                report = check_xi_only(R, ansatz, rng=rng,
                                       factor=ansatz.factors.get(name))
            except DomainError:
                oks.append(False)
                continue
            oks.append(report.ok)
        assert oks
        assert not all(oks)
