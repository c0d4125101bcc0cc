"""
Catalog of invariant solutions.

Every entry names a subalgebra, its generator and what is claimed for
it: explicit fields, an implicit relation for the profile, a quadrature,
or only the reduced equations. Entries whose printed form is wrong carry
a discrepancy block with the corrected form, verification runs both.
"""
from collections import OrderedDict
from itertools import product
import math
import os
import queue
import re
import threading
import time

import numpy

from .context import (CatalogError, ConstraintError, DomainError,
                      NumericsError, SymredError, SymredThread, setting)
from .expression import (Env, add, as_expr, differentiate, evaluate, mul, neg,
                         parse, power, resolve_abs, simplify, substitute)
from .liealg import flow, get_case
from .models import (FIELDS, SAMPLE_DOMAIN, PDESystemPair, get_spec,
                     order_split, potential_split, residual, scale_of)
from .numerics import integrate_adaptive_simpson, solve_integral_equation
from .reduction import (XI, ReductionAnsatz, annihilates, apply_ansatz,
                        check_xi_only, match_reduced_ode, standin,
                        standin_domain)
from .utils import entry_rng, logger, yaml_load

CATALOG_PATH = os.path.join(os.path.dirname(__file__), 'catalog.yaml')
KINDS = ('closed-form', 'implicit', 'quadrature', 'reduced-ode-only')
STATUSES = ('pass', 'discrepancy', 'fail')
DEFAULT_RANGES = OrderedDict([
    ('f0', (0.5, 3.0)),
    ('lambda0', (0.0, 1.0)),
    ('p', (0.5, 2.0)),
    ('s', (-2.0, 1.0)),
    ('q', (-1.0, 1.0)),
])
SIGN = 'sgn'
SIGN_CHOICES = (1, -1)
DRAW_RETRIES = 50
DRAW_DIGITS = 3
FD_H = 1e-2
QUAD_TOL = 1e-12
CONSTRAINT_RE = re.compile(r'^(.+?)\s*(==|!=|>=|<=|>|<)\s*(.+)$')
# Keys merged name by name when a variant or a correction is applied,
# other keys are replaced
MERGED_KEYS = ('params', 'derived', 'signs', 'domain')
ENTRY_ONLY = ('variants', 'discrepancy', 'open_item', 'name')


def merge(base, over, inherit_reductions=True):
    res = OrderedDict(
        (k, v) for k, v in base.items() if k not in ENTRY_ONLY)
    if not inherit_reductions:
        res.pop('reductions', None)
    for key, value in over.items():
        if key in MERGED_KEYS:
            merged = OrderedDict(res.get(key) or {})
            merged.update(value or {})
            res[key] = merged
        elif key == 'constraints':
            res[key] = list(res.get(key) or []) + list(value or [])
        else:
            res[key] = value
    return res


def expression_texts(doc):
    "All expression strings of a catalog document"
    for key in ('fields', 'derived'):
        for value in (doc.get(key) or {}).values():
            yield value
    for key in (doc.get('signs') or {}):
        yield key
    for text in doc.get('constraints') or []:
        for clause in text.split(' or '):
            m = CONSTRAINT_RE.match(clause.strip())
            if m:
                yield m.group(1)
                yield m.group(3)
    if doc.get('element'):
        yield doc['element']
    implicit = doc.get('implicit') or {}
    if 'relation' in implicit:
        yield implicit['relation']
    quad = doc.get('quadrature') or {}
    for key in ('integrand', 'lower', 'origin', 'exact'):
        if key in quad:
            yield quad[key]
    for item in quad.get('grid') or []:
        yield item
    for spec in doc.get('reductions') or []:
        yield spec.get('xi', '')
        for key in ('forms', 'odes', 'factors', 'shell'):
            for value in (spec.get(key) or {}).values():
                yield value
        for value in spec.get('invariants') or []:
            yield value


def as_text(value):
    return value if isinstance(value, str) else repr(value)


class Constraint:

    def __init__(self, text):
        self.text = text
        self.clauses = []
        for clause in text.split(' or '):
            m = CONSTRAINT_RE.match(clause.strip())
            if m is None:
                raise CatalogError('Malformed constraint "%s"' % text)
            lhs, op, rhs = m.groups()
            self.clauses.append((parse(lhs), op, parse(rhs)))

    def holds(self, env):
        for lhs, op, rhs in self.clauses:
            a, b = evaluate(lhs, env), evaluate(rhs, env)
            equal = abs(a - b) <= 1e-9 * (1 + max(abs(a), abs(b)))
            if op == '==':
                ok = equal
            elif op == '!=':
                ok = not equal
            elif op == '>':
                ok = a > b and not equal
            elif op == '<':
                ok = a < b and not equal
            elif op == '>=':
                ok = a > b or equal
            else:
                ok = a < b or equal
            if ok:
                return True
        return False

    def __repr__(self):
        return '<Constraint %s>' % self.text


class Check:
    """
    One verifiable claim of an entry: the entry itself, one of its
    variants or a corrected form.
    """

    def __init__(self, entry_id, label, doc):
        self.entry_id = entry_id
        self.label = label
        self.doc = doc
        try:
            self.case = get_spec(doc.get('case'))
        except SymredError as exc:
            raise CatalogError('%s: %s' % (label, exc))
        self.kind = doc.get('kind')
        if self.kind not in KINDS:
            raise CatalogError('%s: unknown kind "%s" (expected one of %s)' % (
                label, self.kind, ', '.join(KINDS)))
        self.element = doc.get('element')
        self.open_item = doc.get('open_item')
        self.discrepancy = doc.get('discrepancy')
        self.tolerance = doc.get('tolerance')
        self.domain = dict(
            (k, tuple(float(b) for b in v))
            for k, v in (doc.get('domain') or {}).items())
        self.reductions = list(doc.get('reductions') or [])
        self.implicit = doc.get('implicit')
        self.quadrature = doc.get('quadrature')
        try:
            self._parse()
        except SymredError as exc:
            if isinstance(exc, CatalogError):
                raise
            raise CatalogError('%s: %s' % (label, exc))
        self._validate()

    def _parse(self):
        doc = self.doc
        self.params = OrderedDict(doc.get('params') or {})
        self.derived = OrderedDict(
            (k, parse(as_text(v)))
            for k, v in (doc.get('derived') or {}).items())
        self.constraints = [
            Constraint(t) for t in doc.get('constraints') or []]
        self.signs = OrderedDict(
            (parse(k), int(v)) for k, v in (doc.get('signs') or {}).items())
        self.fields = OrderedDict(
            (k, parse(as_text(v)))
            for k, v in (doc.get('fields') or {}).items())
        symbols = set()
        for text in expression_texts(doc):
            symbols |= parse(as_text(text)).free_symbols()
        if SIGN in symbols and SIGN not in self.params:
            self.params[SIGN] = OrderedDict([('choices', list(SIGN_CHOICES))])
        for name, spec in self.params.items():
            param_kind(self.label, name, spec)

    def _validate(self):
        label = self.label
        fields = FIELDS if self.case.potential else ('u0', 'u1')
        if self.kind == 'closed-form':
            missing = [f for f in fields if f not in self.fields]
            if missing:
                raise CatalogError('%s: no expression for %s' % (
                    label, ', '.join(missing)))
        elif not self.reductions:
            raise CatalogError('%s: %s entries need a reduction' % (
                label, self.kind))
        if self.kind == 'implicit' and not self.implicit:
            raise CatalogError('%s: missing implicit relation' % label)
        if self.kind == 'quadrature':
            if not self.quadrature:
                raise CatalogError('%s: missing quadrature' % label)
            odes = self.reductions[0].get('odes') or {}
            if self.quadrature.get('ode') not in odes:
                raise CatalogError('%s: quadrature checks unknown equation %s'
                                   % (label, self.quadrature.get('ode')))
        for spec in self.reductions:
            if 'xi' not in spec or not spec.get('forms'):
                raise CatalogError('%s: reduction without xi or forms' % label)
        unknown = set(self.fields) - set(fields)
        if unknown:
            raise CatalogError('%s: unknown field(s) %s' % (
                label, ', '.join(sorted(unknown))))
        allowed = {'t', 'x'} | set(self.names()) | set(self.case.fixed)
        for name, e in self.fields.items():
            extra = e.free_symbols() - allowed
            if extra:
                raise CatalogError('%s: undeclared symbol(s) %s in %s' % (
                    label, ', '.join(sorted(extra)), name))

    def param_specs(self):
        specs = OrderedDict()
        for name in self.case.params:
            specs[name] = self.params.get(name, list(DEFAULT_RANGES[name]))
        for name, spec in self.params.items():
            specs.setdefault(name, spec)
        for name in self.derived:
            specs.pop(name, None)
        return specs

    def names(self):
        return list(self.param_specs()) + list(self.derived)

    def choice_names(self):
        return [n for n, spec in self.param_specs().items()
                if param_kind(self.label, n, spec) == 'choices']

    def combinations(self):
        specs = self.param_specs()
        lists = [specs[n]['choices'] for n in self.choice_names()]
        return [OrderedDict(zip(self.choice_names(), combo))
                for combo in product(*lists)]

    def draw(self, rng, choices=None):
        """
        Random admissible parameter values, interval draws are rounded
        so that the numbers stay short rationals.
        """
        choices = choices or {}
        error = None
        for _ in range(DRAW_RETRIES):
            values = OrderedDict()
            for name, spec in self.param_specs().items():
                kind = param_kind(self.label, name, spec)
                if kind == 'range':
                    lo, hi = float(spec[0]), float(spec[1])
                    if lo == hi:
                        values[name] = lo
                    else:
                        values[name] = round(float(rng.uniform(lo, hi)),
                                             DRAW_DIGITS)
                elif kind == 'choices':
                    values[name] = choices.get(name, spec['choices'][0])
            try:
                return self.resolve(values)
            except ConstraintError as exc:
                error = exc
        raise ConstraintError('%s: no admissible draw in %s attempts (%s)' % (
            self.label, DRAW_RETRIES, error))

    def resolve(self, values):
        """
        Complete values with the fixed parameters and the derived
        constants, then check the case and the entry constraints.
        """
        res = OrderedDict(self.case.fixed)
        given = dict(values or {})
        for name, spec in self.param_specs().items():
            kind = param_kind(self.label, name, spec)
            if name in given:
                value = given[name]
            elif kind == 'fixed':
                value = spec
            else:
                continue
            res[name] = fixed_value(value)
        missing = [n for n in self.param_specs() if n not in res]
        if missing:
            raise ConstraintError('%s: missing value for %s' % (
                self.label, ', '.join(missing)))
        for name, e in self.derived.items():
            try:
                res[name] = evaluate(e, Env(res))
            except DomainError as exc:
                raise ConstraintError('%s: %s is undefined (%s)' % (
                    self.label, name, exc))
        self.case.check(res)
        env = Env(res)
        for constraint in self.constraints:
            try:
                ok = constraint.holds(env)
            except DomainError:
                ok = False
            if not ok:
                raise ConstraintError('%s: constraint "%s" violated' % (
                    self.label, constraint.text))
        return res

    def corrected(self):
        if not self.discrepancy:
            raise SymredError('%s has no corrected form' % self.label)
        over = self.discrepancy.get('corrected') or {}
        return Check(self.entry_id, '%s (corrected)' % self.label,
                     merge(self.doc, over))

    def chart(self):
        chart = dict(SAMPLE_DOMAIN)
        chart.update((k, v) for k, v in self.domain.items() if k in chart)
        return chart

    def __repr__(self):
        return '<Check %s %s>' % (self.label, self.kind)


def param_kind(label, name, spec):
    if isinstance(spec, bool):
        raise CatalogError('%s: invalid value for %s' % (label, name))
    if isinstance(spec, (int, float, str)):
        return 'fixed'
    if isinstance(spec, (list, tuple)) and len(spec) == 2:
        return 'range'
    if isinstance(spec, dict) and spec.get('choices'):
        return 'choices'
    raise CatalogError('%s: cannot read parameter %s=%r' % (
        label, name, spec))


def fixed_value(value):
    if isinstance(value, str):
        return evaluate(parse(value))
    return value


class SolutionEntry:

    def __init__(self, doc):
        if not isinstance(doc, dict) or 'id' not in doc:
            raise CatalogError('Catalog document without id: %r' % (doc,))
        self.id = str(doc['id'])
        self.doc = doc
        self.main = Check(self.id, self.id, doc)
        self.case = self.main.case
        self.kind = self.main.kind
        self.subalgebra = doc.get('subalgebra', '')
        self.element = doc.get('element')
        self.open_item = doc.get('open_item')
        self.variants = OrderedDict()
        for item in doc.get('variants') or []:
            name = item.get('name')
            if not name:
                raise CatalogError('%s: variant without name' % self.id)
            label = '%s [%s]' % (self.id, name)
            self.variants[name] = Check(
                self.id, label, merge(doc, item, inherit_reductions=False))

    @property
    def checks(self):
        return [self.main] + list(self.variants.values())

    def variant(self, name):
        try:
            return self.variants[name]
        except KeyError:
            raise CatalogError('%s has no variant "%s"' % (self.id, name))

    def flagged(self):
        return [c for c in self.checks if c.discrepancy]

    def row(self):
        flags = []
        if self.flagged():
            flags.append('discrepancy')
        if self.open_item or any(c.open_item for c in self.checks):
            flags.append('open')
        return (self.id, self.case.id, self.subalgebra, self.kind,
                len(self.variants), ','.join(flags) or '-')

    def __repr__(self):
        return '<SolutionEntry %s %s>' % (self.id, self.kind)


class Catalog:

    def __init__(self, entries):
        self.entries = OrderedDict()
        for entry in entries:
            if entry.id in self.entries:
                raise CatalogError('Duplicate catalog entry %s' % entry.id)
            self.entries[entry.id] = entry

    def get(self, entry_id):
        try:
            return self.entries[entry_id]
        except KeyError:
            raise CatalogError('Unknown catalog entry "%s"' % entry_id)

    def by_case(self, case_id):
        try:
            case = get_spec(case_id)
        except SymredError as exc:
            raise CatalogError(str(exc))
        return [e for e in self if e.case.id == case.id]

    def __iter__(self):
        return iter(self.entries.values())

    def __len__(self):
        return len(self.entries)

    def __contains__(self, entry_id):
        return entry_id in self.entries


_CATALOG = None
_CATALOG_LOCK = threading.Lock()


def load_catalog(path=None):
    global _CATALOG
    if path is None:
        with _CATALOG_LOCK:
            if _CATALOG is None:
                _CATALOG = read_catalog(CATALOG_PATH)
            return _CATALOG
    return read_catalog(path)


def read_catalog(path):
    with open(path) as fh:
        docs = yaml_load(fh)
    if not isinstance(docs, list):
        raise CatalogError('%s: expected a list of entries' % path)
    catalog = Catalog(SolutionEntry(doc) for doc in docs)
    logger.debug('Loaded %s catalog entries from %s', len(catalog), path)
    return catalog


def get_entry(entry_id):
    return load_catalog().get(entry_id)


def as_check(entry, corrected=False):
    if isinstance(entry, str):
        entry = get_entry(entry)
    check = entry.main if isinstance(entry, SolutionEntry) else entry
    return check.corrected() if corrected else check


def numeric_bindings(values):
    return dict((k, as_expr(v)) for k, v in values.items())


def instantiate(entry, values, corrected=False):
    """
    Closed-form fields with every parameter replaced by its value, abs()
    resolved with the recorded signs
    """
    check = as_check(entry, corrected)
    if not check.fields:
        raise SymredError('%s has no closed form' % check.label)
    values = check.resolve(values)
    bindings = numeric_bindings(values)
    signs = dict((substitute(k, bindings), v) for k, v in check.signs.items())
    return OrderedDict(
        (name, simplify(resolve_abs(substitute(e, bindings), signs)))
        for name, e in check.fields.items())


# Verification

_PAIRS = {}
_PAIRS_LOCK = threading.Lock()


def system_pair(case_id):
    "Order-0/1 pair, or the potential pair for cases with a sixth generator"
    with _PAIRS_LOCK:
        if case_id not in _PAIRS:
            spec = get_spec(case_id)
            if spec.potential is not None:
                _PAIRS[case_id] = potential_split(spec)
            else:
                _PAIRS[case_id] = order_split(spec)
        return _PAIRS[case_id]


def numeric_pair(case_id, values):
    pair = system_pair(case_id)
    bindings = numeric_bindings(values)
    return PDESystemPair(pair.case, [
        (name, simplify(substitute(e, bindings))) for name, e in pair])


def build_ansatz(check, spec, values):
    domain = dict(check.domain)
    domain.update(spec.get('domain') or {})
    return ReductionAnsatz(
        check.entry_id, check.case.id, as_text(spec['xi']), spec['forms'],
        element=check.element, factors=spec.get('factors'),
        invariants=spec.get('invariants'), odes=spec.get('odes'),
        domain=domain, values=values, shell=spec.get('shell'))


class CheckReport:

    def __init__(self, check, tolerance):
        self.label = check.label
        self.kind = check.kind
        self.tolerance = tolerance
        self.ok = True
        self.worst = 0.0
        self.draws = []
        self.details = []
        self.mismatches = []
        self.samples = 0

    def record(self, gap, what='residual'):
        self.worst = max(self.worst, gap)
        if gap > self.tolerance:
            self.fail('%s %.3g above tolerance %.3g' % (
                what, gap, self.tolerance))

    def fail(self, message):
        self.ok = False
        self.details.append(message)

    def as_dict(self):
        return OrderedDict([
            ('ok', self.ok),
            ('worst', self.worst),
            ('tolerance', self.tolerance),
            ('draws', [OrderedDict((k, float(v)) for k, v in d.items())
                       for d in self.draws]),
            ('details', list(self.details)),
            ('mismatches', list(self.mismatches)),
        ])

    def __repr__(self):
        return '<CheckReport %s ok=%s worst=%.3g>' % (
            self.label, self.ok, self.worst)


def check_reductions(check, values, rng, report):
    pair = system_pair(check.case.id)
    for spec in check.reductions:
        ansatz = build_ansatz(check, spec, values)
        matched = match_reduced_ode(pair, ansatz, rng=rng,
                                    ledger=report.mismatches)
        for name, ok in matched.items():
            if not ok:
                report.fail('reduced %s differs from the encoded equation' %
                            name)
        if ansatz.invariants and check.element:
            for label, ok in annihilates(ansatz, rng=rng).items():
                if not ok:
                    report.fail('%s is not invariant under %s' % (
                        label, check.element))


def reduction_reports(entry, values=None, rng=None):
    """
    For every reduction of entry and every factored residual: the
    xi-only report and whether the encoded equation matches (None when
    no equation is encoded). Returns (values, rows).
    """
    check = as_check(entry)
    if not check.reductions:
        raise SymredError('%s has no reduction' % check.label)
    rng = rng or entry_rng(setting('seed'), check.entry_id)
    if values:
        values = check.resolve(values)
    else:
        values = check.draw(rng, check.combinations()[0])
    pair = system_pair(check.case.id)
    rows = []
    for i, spec in enumerate(check.reductions):
        ansatz = build_ansatz(check, spec, values)
        matched = match_reduced_ode(pair, ansatz, rng=rng)
        reduced = apply_ansatz(pair, ansatz)
        for (name, _), R in zip(pair, reduced):
            if name not in ansatz.factors and name not in ansatz.odes:
                continue
            report = check_xi_only(
                R, ansatz, factor=ansatz.factors.get(name), rng=rng,
                tolerance=setting('tolerance'))
            rows.append((i, name, report, matched.get(name)))
    return values, rows


def field_residual(entry, values, fields, samples=None, rng=None,
                   domain=None):
    "Residual report of arbitrary fields against the pair of the entry case"
    check = as_check(entry)
    values = check.resolve(values)
    pair = numeric_pair(check.case.id, values)
    return residual(pair, fields, samples=samples,
                    domain=domain or check.chart(), rng=rng)


def check_closed_form(check, values, rng, samples, report):
    fields = instantiate(check, values)
    res = field_residual(check, values, fields, samples=samples, rng=rng)
    report.record(res.worst())
    check_reductions(check, values, rng, report)


def implicit_derivatives(relation, unknown, order):
    """
    Derivatives of the profile F(xi) defined by relation(F, xi) = 0,
    expressed in F and xi
    """
    dF = neg(mul(differentiate(relation, XI),
                 power(differentiate(relation, unknown), -1)))
    res = [dF]
    while len(res) < order:
        last = res[-1]
        res.append(simplify(add(
            differentiate(last, XI), mul(differentiate(last, unknown), dF))))
    return res


def sampled_gap(e, domain, env, rng, samples):
    "Largest |e| / (1 + sum of |terms|) over random points of domain"
    names = sorted(e.free_symbols() - set(env.values))
    worst = 0.0
    done = failures = 0
    while done < samples:
        point = env.bind(dict(
            (n, float(rng.uniform(*domain[n]))) for n in names))
        try:
            value = evaluate(e, point)
            scale = scale_of(e, point)
        except DomainError as exc:
            failures += 1
            if failures > 10 * samples:
                raise DomainError('sampling exhausted after %s domain '
                                  'violations (%s)' % (failures, exc))
            continue
        worst = max(worst, abs(value) / (1 + scale))
        done += 1
    return worst


def check_implicit(check, values, rng, samples, report):
    spec = check.implicit
    unknown = spec.get('unknown', 'F')
    ansatz = build_ansatz(check, check.reductions[0], values)
    pair = system_pair(check.case.id)
    reduced = dict(zip([n for n, _ in pair], apply_ansatz(pair, ansatz)))
    name = spec.get('residual', 'E0')
    if name not in reduced:
        raise CatalogError('%s: no residual %s' % (check.label, name))
    R = reduced[name]
    orders = [k for k in range(1, 4) if standin(unknown, k).name in
              R.free_symbols()]
    relation = parse(spec['relation'])
    bindings = {}
    if orders:
        derivs = implicit_derivatives(relation, unknown, max(orders))
        for k in orders:
            bindings[standin(unknown, k).name] = substitute(
                derivs[k - 1], {XI: ansatz.xi})
    e = simplify(substitute(R, bindings))
    domain = standin_domain(e, ansatz)
    report.record(sampled_gap(e, domain, Env(values), rng, samples))
    check_reductions(check, values, rng, report)


class QuadratureTable:
    """
    Profile F tabulated on a grid of the quadrature variable, each point
    is solved from the nearest point already known.
    """

    def __init__(self, variable, integrand, origin, ref, bracket,
                 slope=None):
        self.variable = variable
        self.integrand = integrand
        self.slope = slope
        self.bracket = bracket
        self.known = [(origin, ref)]
        self.sign = math.copysign(1, integrand(ref))
        self.rows = []

    def solve(self, v):
        v0, F0 = min(self.known, key=lambda item: abs(item[0] - v))
        target = v - v0
        if target == 0:
            return F0
        g0 = self.integrand(F0)
        if g0 == 0:
            raise NumericsError('integrand vanishes at F=%r' % F0)
        lo, hi = self.bracket
        step = target / g0
        end = F0
        for _ in range(60):
            end = min(max(F0 + 1.5 * step, lo), hi)
            area = self.area(F0, end)
            if (area - target) * (0 - target) <= 0:
                break
            if end in (lo, hi):
                raise NumericsError(
                    'no solution for %s=%r inside [%r, %r]' % (
                        self.variable, v, lo, hi))
            step *= 2
        else:
            raise NumericsError('bracket search failed for %s=%r' % (
                self.variable, v))
        a, b = sorted((F0, end))
        F = solve_integral_equation(self.integrand, F0, target, a, b,
                                    QUAD_TOL)
        if math.copysign(1, self.integrand(F)) != self.sign:
            raise NumericsError('integrand changes sign near F=%r' % F)
        self.known.append((v, F))
        return F

    def area(self, a, b):
        value, _ = integrate_adaptive_simpson(self.integrand, a, b, QUAD_TOL)
        return value

    def tabulate(self, grid):
        # walk away from the origin so that every solve stays local
        origin = self.known[0][0]
        grid = [float(v) for v in grid]
        up = sorted(v for v in grid if v >= origin)
        down = sorted((v for v in grid if v < origin), reverse=True)
        solved = dict((v, self.solve(v)) for v in up + down)
        self.rows = [(v, solved[v]) for v in sorted(grid)]
        self.check_monotone()
        return self.rows

    def check_monotone(self):
        diffs = numpy.diff([F for _, F in self.rows])
        if len(diffs) and not (numpy.all(diffs > 0) or numpy.all(diffs < 0)):
            raise NumericsError('tabulated profile is not monotone')

    def derivatives(self, v, h=FD_H):
        "Five-point central estimates of F, F', F''"
        F = dict((k, self.solve(v + k * h)) for k in (-2, -1, 1, 2))
        F[0] = self.solve(v)
        d1 = (F[-2] - 8 * F[-1] + 8 * F[1] - F[2]) / (12 * h)
        d2 = (-F[-2] + 16 * F[-1] - 30 * F[0] + 16 * F[1] - F[2]) / (
            12 * h * h)
        return F[0], d1, d2

    def slopes(self, v):
        """
        F, F' and F'' from the defining relation: F' = 1/g(F) and
        F'' = -g'(F)/g(F)^3, g being the integrand.
        """
        if self.slope is None:
            raise NumericsError('no integrand slope for %s' % self.variable)
        F = self.solve(v)
        g = self.integrand(F)
        if g == 0:
            raise NumericsError('integrand vanishes at F=%r' % F)
        return F, 1.0 / g, -self.slope(F) / g ** 3

    def csv_rows(self):
        yield '%s,F' % self.variable
        for v, F in self.rows:
            yield '%r,%r' % (v, F)


def quadrature_solve(entry, values, grid=None):
    """
    Tabulate F from integral(integrand, F_ref, F) = v - origin by
    bracketed root finding over adaptive Simpson quadrature.
    """
    check = as_check(entry)
    spec = check.quadrature
    if not spec:
        raise SymredError('%s has no quadrature' % check.label)
    values = check.resolve(values)
    env = Env(values)
    integrand_e = parse(spec['integrand'])
    slope_e = simplify(differentiate(integrand_e, 'phi'))

    def integrand(phi):
        return evaluate(integrand_e, env.bind({'phi': phi}))

    def slope(phi):
        return evaluate(slope_e, env.bind({'phi': phi}))

    def value_of(item):
        return evaluate(parse(as_text(item)), env)

    bracket = tuple(float(b) for b in spec.get('bracket', (-50, 50)))
    table = QuadratureTable(
        spec.get('variable', 't'), integrand, value_of(spec['origin']),
        value_of(spec['lower']), bracket, slope)
    if grid is None:
        a, b, n = spec['grid']
        grid = numpy.linspace(value_of(a), value_of(b), int(n))
    table.tabulate(grid)
    logger.debug('%s: %s quadrature points', check.label, len(table.rows))
    return table


def check_quadrature(check, values, rng, samples, report):
    spec = check.quadrature
    unknown = spec.get('unknown', 'F')
    table = quadrature_solve(check, values)
    ode = parse(check.reductions[0]['odes'][spec['ode']])
    env = Env(values)
    gap = drift = 0.0
    for v, _ in table.rows:
        F, d1, d2 = table.slopes(v)
        _, fd1, fd2 = table.derivatives(v)
        drift = max(drift, abs(fd1 - d1) / (1 + abs(d1)),
                    abs(fd2 - d2) / (1 + abs(d2)))
        point = env.bind({
            unknown: F, standin(unknown, 1).name: d1,
            standin(unknown, 2).name: d2, XI: v, table.variable: v})
        value = evaluate(ode, point)
        gap = max(gap, abs(value) / (1 + scale_of(ode, point)))
    logger.debug('%s: table differences off the exact slopes by %.3g',
                 check.label, drift)
    report.record(gap, 'quadrature residual')
    if spec.get('exact'):
        exact = parse(spec['exact'])
        err = max(
            abs(F - evaluate(exact, env.bind({table.variable: v}))) /
            (1 + abs(F)) for v, F in table.rows)
        report.record(err, 'gap to the exact profile')
    check_reductions(check, values, rng, report)


def check_reduced(check, values, rng, samples, report):
    check_reductions(check, values, rng, report)


RUNNERS = {
    'closed-form': check_closed_form,
    'implicit': check_implicit,
    'quadrature': check_quadrature,
    'reduced-ode-only': check_reduced,
}


def run_check(check, rng, samples=None):
    if check.kind == 'quadrature':
        tolerance = setting('quad_tolerance', check.tolerance)
    else:
        tolerance = setting('tolerance', check.tolerance)
    report = CheckReport(check, tolerance)
    combos = check.combinations()
    draws = max(setting('draws'), len(combos))
    per_draw = int(math.ceil(setting('samples', samples) / float(draws)))
    runner = RUNNERS[check.kind]
    for i in range(draws):
        try:
            values = check.draw(rng, combos[i % len(combos)])
        except ConstraintError as exc:
            report.fail(str(exc))
            break
        report.draws.append(values)
        report.samples += per_draw
        try:
            runner(check, values, rng, per_draw, report)
        except SymredError as exc:
            report.fail('%s: %s' % (type(exc).__name__, exc))
    logger.debug('%s: %s (worst %.3g)', check.label,
                 'ok' if report.ok else 'failed', report.worst)
    return report


class CheckResult:

    def __init__(self, check, printed, corrected=None):
        self.check = check
        self.printed = printed
        self.corrected = corrected
        self.note = None
        if corrected is None:
            self.status = 'pass' if printed.ok else 'fail'
        elif printed.ok:
            self.status = 'pass'
            self.note = 'flagged form passes as printed'
        else:
            self.status = 'discrepancy' if corrected.ok else 'fail'

    def as_dict(self):
        res = OrderedDict([
            ('check', self.check.label),
            ('kind', self.check.kind),
            ('status', self.status),
            ('printed', self.printed.as_dict()),
        ])
        if self.corrected is not None:
            res['corrected'] = self.corrected.as_dict()
            res['discrepancy'] = self.check.discrepancy.get('note')
        if self.note:
            res['note'] = self.note
        if self.check.open_item:
            res['open_item'] = self.check.open_item
        return res


class EntryReport:

    def __init__(self, entry):
        self.entry = entry
        self.results = []
        self.samples = 0
        self.elapsed = 0.0

    @property
    def status(self):
        statuses = set(r.status for r in self.results)
        if 'fail' in statuses or not self.results:
            return 'fail'
        if 'discrepancy' in statuses:
            return 'discrepancy'
        return 'pass'

    @property
    def passed(self):
        return self.status != 'fail'

    def discrepancies(self):
        for r in self.results:
            if r.status == 'discrepancy':
                yield OrderedDict([
                    ('entry', self.entry.id),
                    ('check', r.check.label),
                    ('note', r.check.discrepancy.get('note')),
                    ('printed_worst', r.printed.worst),
                    ('corrected_worst', r.corrected.worst),
                ])

    def residuals(self):
        res = OrderedDict()
        for r in self.results:
            res[r.check.label] = r.printed.worst
            if r.corrected is not None:
                res[r.corrected.label] = r.corrected.worst
        return res

    def notes(self):
        notes = []
        for r in self.results:
            if r.status == 'discrepancy':
                notes.append('%s fails as printed: %s' % (
                    r.check.label, r.check.discrepancy.get('note')))
            if r.note:
                notes.append('%s: %s' % (r.check.label, r.note))
            if r.check.open_item:
                notes.append('%s open: %s' % (
                    r.check.label, r.check.open_item))
        return notes

    def as_dict(self):
        # no timings, reports must be reproducible byte for byte
        return OrderedDict([
            ('id', self.entry.id),
            ('pass', self.passed),
            ('status', self.status),
            ('mode', self.entry.kind),
            ('case', self.entry.case.id),
            ('subalgebra', self.entry.subalgebra),
            ('residuals', self.residuals()),
            ('samples', self.samples),
            ('notes', self.notes()),
            ('checks', [r.as_dict() for r in self.results]),
        ])

    def __repr__(self):
        return '<EntryReport %s %s>' % (self.entry.id, self.status)


def verify(entry, rng=None, samples=None):
    """
    Run every check of an entry (the entry and its variants), flagged
    checks are run as printed and corrected.
    """
    if isinstance(entry, str):
        entry = get_entry(entry)
    rng = rng or entry_rng(setting('seed'), entry.id)
    start = time.time()
    report = EntryReport(entry)
    for check in entry.checks:
        printed = run_check(check, rng, samples)
        corrected = None
        if check.discrepancy:
            corrected = run_check(check.corrected(), rng, samples)
        report.results.append(CheckResult(check, printed, corrected))
        report.samples += printed.samples + (
            corrected.samples if corrected is not None else 0)
    report.elapsed = time.time() - start
    log = logger.info if report.status == 'pass' else logger.warning
    log('%s: %s (%.2fs)', entry.id, report.status, report.elapsed)
    return report


def verify_all(entries=None, workers=None, samples=None):
    """
    Verify entries on a pool of worker threads. Every entry draws from
    its own generator, results do not depend on the scheduling.
    """
    entries = list(load_catalog() if entries is None else entries)
    workers = max(1, int(setting('workers', workers)))
    jobs = queue.Queue()
    for entry in entries:
        jobs.put(entry)
    results = {}
    errors = []

    def work():
        while True:
            try:
                entry = jobs.get_nowait()
            except queue.Empty:
                return
            try:
                results[entry.id] = verify(entry, samples=samples)
            except Exception as exc:
                logger.exception('Verification of %s aborted', entry.id)
                errors.append((entry.id, exc))

    threads = [SymredThread(target=work)
               for _ in range(min(workers, len(entries)) or 1)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    if errors:
        entry_id, exc = errors[0]
        raise SymredError('Verification of %s aborted: %s' % (entry_id, exc))
    return [results[e.id] for e in entries]


def summary(reports):
    reports = list(reports)
    discrepancies = [d for r in reports for d in r.discrepancies()]
    return OrderedDict([
        ('total', len(reports)),
        ('pass', sum(1 for r in reports if r.passed)),
        ('fail', sum(1 for r in reports if not r.passed)),
        ('failed', [r.entry.id for r in reports if not r.passed]),
        ('discrepancies', discrepancies),
    ])


def ledger(catalog=None):
    "Every flagged check of the catalog with its note"
    catalog = catalog or load_catalog()
    res = []
    for entry in catalog:
        for check in entry.flagged():
            res.append(OrderedDict([
                ('entry', entry.id),
                ('check', check.label),
                ('note', check.discrepancy.get('note')),
            ]))
    return res


def push_forward(entry, generator, s, values, corrected=False):
    """
    Image of a closed-form solution under the flow of a basis generator:
    u'(t, x) = flow_s(u) taken at the preimage of (t, x).
    """
    check = as_check(entry, corrected)
    fields = instantiate(check, values)
    values = check.resolve(values)
    bindings = numeric_bindings(values)
    case = get_case(check.case.id)
    forward = flow(case, generator, s)
    backward = flow(case, generator, neg(as_expr(s)))
    base = dict((z, simplify(substitute(backward[z], bindings)))
                for z in ('t', 'x'))
    for z, e in base.items():
        if e.free_symbols() - {'t', 'x'}:
            raise SymredError('Flow of %s moves %s with the fields' % (
                generator, z))
    at_preimage = dict(bindings)
    at_preimage.update(base)
    for name, e in fields.items():
        at_preimage[name] = substitute(e, base)
    return OrderedDict(
        (name, simplify(substitute(forward[name], at_preimage)))
        for name in fields)
