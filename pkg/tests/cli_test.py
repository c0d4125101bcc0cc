import json
import math

from symred.cli import FAILED, OK, USAGE, cli
from symred.utils import __version__


def lines_of(capsys):
    return capsys.readouterr().out.splitlines()


def test_version(capsys):
    assert cli(['version']) == OK
    assert lines_of(capsys) == [__version__]


def test_unknown_action(capsys):
    assert cli(['frobnicate']) == USAGE


def test_catalog_list(capsys):
    assert cli(['catalog', 'list', '--case', 'III']) == OK
    lines = lines_of(capsys)
    assert lines[0].split() == ['id', 'case', 'subalgebra', 'kind',
                                'variants', 'flags']
    assert len(lines) == 2 + 11
    assert lines[2].startswith('III.15 ')
    assert cli(['catalog', 'list', '--case', 'Z']) == USAGE
    assert cli(['catalog', 'frob']) == USAGE


def test_catalog_show(capsys):
    assert cli(['catalog', 'show', 'I.1']) == OK
    out = capsys.readouterr().out
    assert out.startswith('id: I.1\n')
    assert 'kind: closed-form' in out
    assert cli(['catalog', 'show', 'NOPE']) == USAGE


def test_verify(capsys):
    assert cli(['verify', 'I.1', '--samples', '10']) == OK
    assert lines_of(capsys) == ['I.1      pass']
    assert cli(['verify', 'NOPE']) == USAGE
    assert cli(['verify']) == USAGE


def test_verify_report_is_reproducible(tmp_path, capsys):
    outputs = []
    for name in ('one.json', 'two.json'):
        path = tmp_path / name
        code = cli(['verify', 'I.1', 'III.17', '--samples', '10',
                    '--seed', '3', '--no-timestamp', '--report', str(path)])
        assert code == OK
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    doc = json.loads(outputs[0].decode('utf-8'))
    assert list(doc) == ['run', 'entries', 'summary']
    assert doc['run']['seed'] == 3
    assert doc['run']['timestamp'] is None
    assert [e['id'] for e in doc['entries']] == ['I.1', 'III.17']
    assert doc['summary']['total'] == 2
    assert doc['summary']['fail'] == 0


def test_classify(capsys):
    assert cli(['classify', 'I', 'X1']) == OK
    lines = lines_of(capsys)
    assert lines[0] == '{X1}'
    assert lines[1] == 'representative: X1'
    assert cli(['classify', 'I', '5*X1', '+', '7*X2', '+', 'X3', '+',
                '2*X4']) == OK
    assert lines_of(capsys)[0] == '{X3+aX4}, a=2.000000'
    assert cli(['classify', 'I', '0*X1']) == USAGE
    assert cli(['classify', 'I', 'X7']) == USAGE
    assert cli(['classify', 'VI', 'X1']) == USAGE


def test_bracket(capsys):
    assert cli(['bracket', 'I']) == OK
    assert lines_of(capsys) == [
        '[X1,X3] = X1',
        '[X2,X3] = X2',
        '[X2,X4] = X2',
    ]
    assert cli(['bracket', 'III', '--table']) == OK
    lines = lines_of(capsys)
    assert len(lines) == 2 + 5
    assert lines[0].split(' | ')[0].strip() == '[,]'


def test_quadrature(capsys):
    code = cli(['quadrature', 'IV.pot', '--variant', 'blow-up profile',
                '-P', 'p=1', '-P', 'f0=1', '-P', 't0=0',
                '-g', '-2', '-0.5', '4'])
    assert code == OK
    lines = lines_of(capsys)
    assert lines[0] == 't,F'
    assert len(lines) == 5
    for line in lines[1:]:
        t, F = map(float, line.split(','))
        assert abs(F + 2 * math.log(-t)) < 1e-8
    assert cli(['quadrature', 'IV.pot', '-P', 'p']) == USAGE


def test_quadrature_to_file(tmp_path, capsys):
    path = tmp_path / 'profile.csv'
    code = cli(['quadrature', 'I.2', '--variant', 'amplitude quadrature',
                '-f', str(path)])
    assert code == OK
    rows = path.read_text().splitlines()
    assert rows[0] == 't,F'
    assert len(rows) == 10


def test_flow(capsys):
    assert cli(['flow', 'I.1', 'X4', '0.3']) == OK
    lines = lines_of(capsys)
    assert lines[0].startswith('u0 = ')
    assert lines[1].startswith('u1 = ')
    assert lines[2].startswith('residual: ')
    assert cli(['flow', 'I.1', 'X4', 'abc']) == USAGE
    assert cli(['flow', 'I.1']) == USAGE


def test_reduce(capsys):
    assert cli(['reduce', 'I.2']) == OK
    lines = lines_of(capsys)
    assert lines[1].split() == ['reduction', 'residual', 'xi', 'gap',
                                'pairs', 'xi-only', 'equation']
    assert len(lines) == 1 + 2 + 2


def test_ledger(capsys):
    assert cli(['ledger']) == OK
    lines = lines_of(capsys)
    assert lines[0].split() == ['entry', 'check', 'note']
    assert any(line.startswith('I.6 ') for line in lines)


def test_unknown_generator_fails():
    # case I has four generators
    assert cli(['flow', 'I.1', 'X5', '0.1']) == FAILED
