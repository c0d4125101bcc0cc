import argparse
import json
import os
import sys
from collections import OrderedDict
from datetime import datetime, timezone

import numpy
import yaml

from .context import CatalogError, SymredError, configure
from .expression import to_text
from .liealg import bracket_table, get_case, normalize, parse_element
from .solutions import (field_residual, ledger, load_catalog, push_forward,
                        quadrature_solve, reduction_reports, summary,
                        verify_all)
from .utils import (__version__, ascii_table, ctx, entry_rng, logger,
                    yaml_load)

ACTIONS = ('catalog', 'verify', 'classify', 'bracket', 'reduce',
           'quadrature', 'flow', 'ledger', 'version')
# Exit codes
OK, FAILED, USAGE = 0, 1, 2


class UsageError(SymredError):
    pass


def cli(argv=None):
    parser = argparse.ArgumentParser(description='Symred CLI')
    parser.add_argument('action', help=', '.join(ACTIONS), nargs=1)
    parser.add_argument('target', help='Sub-command, entry ids, case, '
                        'element', nargs='*')
    parser.add_argument(
        '--config',
        help='Config file (defaults to ".symred.yaml")',
        default='.symred.yaml',
    )
    parser.add_argument('--seed', help='Random seed', type=int)
    parser.add_argument('--samples', help='Sample points per check',
                        type=int)
    parser.add_argument('--tolerance', help='Closed-form tolerance',
                        type=float)
    parser.add_argument('--workers', help='Parallel verification workers',
                        type=int)
    parser.add_argument('--report', help='Write the JSON report to this path')
    parser.add_argument(
        '--no-timestamp', help='Leave the timestamp out of the report',
        action='store_true',
    )
    parser.add_argument('-a', '--all', help='Verify every catalog entry',
                        action='store_true')
    parser.add_argument('-c', '--case', help='Filter catalog on case')
    parser.add_argument(
        '-s', '--subalgebra', help='Filter catalog on subalgebra label')
    parser.add_argument('--table', help='Full commutator table',
                        action='store_true')
    parser.add_argument('--variant', help='Entry variant name')
    parser.add_argument('--corrected', help='Use the corrected form',
                        action='store_true')
    parser.add_argument(
        '-P', '--param', action='append', default=[],
        help='Parameter value, as name=value',
    )
    parser.add_argument(
        '-g', '--grid', nargs=3, metavar=('START', 'STOP', 'N'),
        help='Quadrature grid',
    )
    parser.add_argument(
        '-f', '--file', help='Write output to file (instead of stdout)')
    parser.add_argument(
        '-d', '--debug', help='Enable debugging', action='store_true'
    )

    args = parser.parse_args(argv)
    if args.debug:
        logger.setLevel('DEBUG')
    if args.action[0] == 'version':
        print(__version__)
        return OK
    if args.action[0] not in ACTIONS:
        parser.print_usage(sys.stderr)
        print('Action "%s" not supported' % args.action[0], file=sys.stderr)
        return USAGE

    if os.path.exists(args.config):
        with open(args.config) as fh:
            cfg = dict(yaml_load(fh) or {})
    else:
        cfg = {}
    for key in ('seed', 'samples', 'tolerance', 'workers', 'report'):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    if args.no_timestamp:
        cfg['timestamp'] = False
    try:
        with configure(cfg):
            return cli_main(args)
    except (CatalogError, UsageError) as exc:
        print('Error: %s' % exc, file=sys.stderr)
        return USAGE
    except SymredError as exc:
        print('Error: %s' % exc, file=sys.stderr)
        return FAILED


def parse_params(items):
    values = OrderedDict()
    for item in items:
        name, sep, value = item.partition('=')
        if not sep or not name.strip():
            raise UsageError('Expected name=value, got "%s"' % item)
        try:
            values[name.strip()] = float(value)
        except ValueError:
            raise UsageError('Invalid value for %s: "%s"' % (name, value))
    return values


def select_check(args, entry_id):
    entry = load_catalog().get(entry_id)
    check = entry.variant(args.variant) if args.variant else entry.main
    if args.corrected:
        check = check.corrected()
    return check


def draw_values(check, args):
    values = parse_params(args.param)
    rng = entry_rng(ctx.seed, check.entry_id)
    drawn = check.draw(rng, check.combinations()[0])
    drawn.update(values)
    return check.resolve(drawn)


def output(args):
    if args.file:
        return open(args.file, 'w', newline='\n')
    return sys.stdout


def write_lines(fh, lines):
    for line in lines:
        fh.write(line)


def require(args, count, usage):
    if len(args.target) < count:
        raise UsageError('Usage: symred %s' % usage)


def case_of(text):
    try:
        return get_case(text)
    except SymredError as exc:
        raise UsageError(str(exc))


def cli_main(args):
    action = args.action[0]

    if action == 'catalog':
        require(args, 1, 'catalog list|show [ID]')
        catalog = load_catalog()
        sub = args.target[0]
        if sub == 'list':
            entries = list(catalog)
            if args.case:
                entries = catalog.by_case(args.case)
            if args.subalgebra:
                entries = [e for e in entries
                           if args.subalgebra in e.subalgebra]
            headers = ['id', 'case', 'subalgebra', 'kind', 'variants',
                       'flags']
            write_lines(sys.stdout, ascii_table(
                [e.row() for e in entries], headers=headers))
        elif sub == 'show':
            require(args, 2, 'catalog show ID')
            entry = catalog.get(args.target[1])
            sys.stdout.write(yaml.safe_dump(
                json.loads(json.dumps(entry.doc)), sort_keys=False,
                allow_unicode=True, default_flow_style=False))
        else:
            raise UsageError('Unknown catalog command "%s"' % sub)

    elif action == 'verify':
        catalog = load_catalog()
        if args.all:
            entries = list(catalog)
        elif args.target:
            entries = [catalog.get(i) for i in args.target]
        else:
            raise UsageError('Usage: symred verify ID [ID ...] | --all')
        reports = verify_all(entries)
        for report in reports:
            print('%-8s %s' % (report.entry.id, report.status))
        doc = OrderedDict([
            ('run', OrderedDict([
                ('seed', ctx.seed),
                ('timestamp', datetime.now(timezone.utc).isoformat()
                 if ctx.timestamp else None),
                ('version', __version__),
            ])),
            ('entries', [r.as_dict() for r in reports]),
            ('summary', summary(reports)),
        ])
        if ctx.report:
            with open(ctx.report, 'w', newline='\n') as fh:
                json.dump(doc, fh, indent=2, ensure_ascii=False)
                fh.write('\n')
            logger.info('Report written to %s', ctx.report)
        return OK if all(r.passed for r in reports) else FAILED

    elif action == 'classify':
        require(args, 2, 'classify CASE ELEMENT')
        case = case_of(args.target[0])
        try:
            X = parse_element(case, ' '.join(args.target[1:]))
        except SymredError as exc:
            raise UsageError(str(exc))
        if X.is_zero():
            raise UsageError('Cannot classify the zero element')
        res = normalize(case, X)
        print(res)
        print('representative: %s' % res.representative)
        if res.conjugator:
            print('conjugator: %s' % ', '.join(map(str, res.conjugator)))
        for note in res.notes:
            print('note: %s' % note)

    elif action == 'bracket':
        require(args, 1, 'bracket CASE [--table]')
        case = case_of(args.target[0])
        if args.table:
            rows = dict(((a, b), text) for a, b, text in bracket_table(
                case, nonzero=False))
            table = [[a] + [rows[a, b] for b in case.names]
                     for a in case.names]
            write_lines(sys.stdout, ascii_table(
                table, headers=['[,]'] + case.names, sep=' | '))
        else:
            for a, b, text in bracket_table(case):
                print('[%s,%s] = %s' % (a, b, text))

    elif action == 'reduce':
        require(args, 1, 'reduce ID')
        check = select_check(args, args.target[0])
        values = parse_params(args.param) or None
        values, rows = reduction_reports(check, values)
        ok = True
        table = []
        for i, name, report, matched in rows:
            ok = ok and report.ok and matched is not False
            table.append((i, name, '%.3g' % report.max_gap, report.pairs,
                          'ok' if report.ok else 'FAIL',
                          '-' if matched is None else
                          ('ok' if matched else 'FAIL')))
        print(', '.join('%s=%.6g' % (k, v) for k, v in values.items()))
        write_lines(sys.stdout, ascii_table(table, headers=[
            'reduction', 'residual', 'xi gap', 'pairs', 'xi-only',
            'equation']))
        return OK if ok else FAILED

    elif action == 'quadrature':
        require(args, 1, 'quadrature ID')
        check = select_check(args, args.target[0])
        values = draw_values(check, args)
        grid = None
        if args.grid:
            start, stop, n = args.grid
            grid = numpy.linspace(float(start), float(stop), int(n))
        table = quadrature_solve(check, values, grid)
        fh = output(args)
        for line in table.csv_rows():
            fh.write(line + '\n')
        if fh is not sys.stdout:
            fh.close()

    elif action == 'flow':
        require(args, 3, 'flow ID GENERATOR S')
        check = select_check(args, args.target[0])
        generator = args.target[1]
        try:
            s = float(args.target[2])
        except ValueError:
            raise UsageError('Invalid flow parameter "%s"' % args.target[2])
        values = draw_values(check, args)
        fields = push_forward(check, generator, s, values)
        for name, e in fields.items():
            print('%s = %s' % (name, to_text(e)))
        report = field_residual(check, values, fields)
        print('residual: %.3g (%s samples)' % (
            report.worst(), report.samples))
        return OK if report.ok() else FAILED

    elif action == 'ledger':
        rows = [(r['entry'], r['check'], ' '.join((r['note'] or '').split()))
                for r in ledger()]
        write_lines(sys.stdout, ascii_table(
            rows, headers=['entry', 'check', 'note']))

    return OK


def main():
    sys.exit(cli())


if __name__ == '__main__':
    main()
