"""
Tests for the command-line entry point
"""

import csv
import io
import json

import pytest

from condensate_lab import cli
from condensate_lab.bose_statmech import PhysicalParams, total_density
from condensate_lab.bulk_spectrum import WireParams, adaptive_cutoff, separable_spectrum
from condensate_lab.config import CACHE_ENV_VAR, DEFAULT_CACHE_DIR
from condensate_lab.graph_spectrum import LatticeSpec
from condensate_lab.run_config import run_config_from_dict

CRITICAL_SCHEDULE = [8.0, 12.0, 16.0, 24.0]


def _read_csv(text):
    comments = {}
    body = []
    for line in text.splitlines():
        if line.startswith('#'):
            key, _, value = line[1:].strip().partition('=')
            comments[key] = value
        else:
            body.append(line)
    rows = list(csv.DictReader(io.StringIO('\n'.join(body))))
    return comments, rows


def _run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _error(stderr):
    lines = [line for line in stderr.splitlines() if line.strip()]
    return json.loads(lines[-1])


def test_graph_spectrum_csv(capsys, write_run_doc, cache_dir):
    path = write_run_doc({'lattice': {'count': 3}})
    code, out, _ = _run(capsys, 'spectrum', '--config', str(path), '--which', 'graph',
                        '--format', 'csv', '--cache-dir', str(cache_dir))
    assert code == 0
    comments, rows = _read_csv(out)
    assert comments['tool'] == 'condensate_lab'
    assert comments['command'] == 'spectrum'
    assert comments['count'] == '3'
    assert [float(row['eigenvalue']) for row in rows] == pytest.approx([0.0, 1.0, 3.0], abs=1e-12)
    assert [row['index'] for row in rows] == ['0', '1', '2']


def test_bulk_spectrum_json(capsys, write_run_doc, cache_dir):
    path = write_run_doc({'bulk_method': {'method': 'separable', 'cutoff': 25.0}})
    code, out, _ = _run(capsys, 'spectrum', '--config', str(path), '--cache-dir', str(cache_dir))
    assert code == 0
    doc = json.loads(out)
    assert doc['meta']['command'] == 'spectrum'
    assert doc['spectrum']['source'] == 'separable'
    assert doc['spectrum']['eigenvalues'][0] == pytest.approx(19.78858, abs=1e-4)
    assert len(doc['spectrum']['eigenvalues']) == 10


def test_wire_narrower_than_length_required(capsys, write_run_doc):
    path = write_run_doc({'wire': {'d': 20.0}})
    code, out, err = _run(capsys, 'solve', '--config', str(path))
    assert code == 2
    assert out == ''
    error = _error(err)
    assert error['error'] == 'config_invalid'
    assert error['field'] == 'wire.d'


def test_missing_config_file(capsys, tmp_path):
    code, _, err = _run(capsys, 'sweep', '--config', str(tmp_path / 'nope.json'))
    assert code == 2
    assert _error(err)['field'] == 'config'


def test_invalid_jobs(capsys, write_run_doc, cache_dir):
    path = write_run_doc()
    code, _, err = _run(capsys, 'sweep', '--config', str(path), '--jobs', '0',
                        '--cache-dir', str(cache_dir))
    assert code == 2
    assert _error(err)['field'] == 'jobs'


def test_solve_free_chain(capsys, write_run_doc, cache_dir):
    path = write_run_doc({'physics': {'lambda': 0.0, 'alpha': 1.0}})
    code, out, _ = _run(capsys, 'solve', '--config', str(path), '--cache-dir', str(cache_dir))
    assert code == 0
    doc = json.loads(out)
    solution = doc['solution']
    assert solution['mu'] < -1.0
    assert abs(solution['density_residual']) <= 1e-10
    assert doc['macroscopic_occupation']['bulk_ground']['ratio'] <= 1.0

    # Feeding the reported mu back reproduces the target density
    wire = WireParams(d=1.0, L=10.0)
    params = PhysicalParams(beta=1.0, alpha=1.0, lam=0.0, rho=1.0)
    bulk = separable_spectrum(wire, adaptive_cutoff(wire, 1.0, 1e-14))
    lattice = LatticeSpec(delta=1.0).lattice_at(10.0)
    assert total_density(solution['mu'], bulk, lattice, params, 10.0) == pytest.approx(1.0, rel=1e-9)


def test_sweep_output_is_reproducible(capsys, write_run_doc, cache_dir, tmp_path):
    path = write_run_doc({'physics': {'lambda': 0.0}})
    first = tmp_path / 'out' / 'first.csv'
    second = tmp_path / 'out' / 'second.csv'
    for target in (first, second):
        code, _, _ = _run(capsys, 'sweep', '--config', str(path), '--format', 'csv',
                          '--output', str(target), '--cache-dir', str(cache_dir))
        assert code == 0
    assert first.read_bytes() == second.read_bytes()

    comments, rows = _read_csv(first.read_text())
    config = run_config_from_dict(json.loads(path.read_text()))
    assert comments['config_fingerprint'] == config.fingerprint
    assert list(rows[0]) == list(cli.SWEEP_COLUMNS)
    assert [float(row['L']) for row in rows] == [25.0, 50.0, 100.0, 200.0]
    assert 'rho0_limit' in comments and 'rho_exc' in comments


def test_sweep_json_to_stdout(capsys, write_run_doc, cache_dir):
    path = write_run_doc()
    code, out, _ = _run(capsys, 'sweep', '--config', str(path), '--cache-dir', str(cache_dir), '--jobs', '2')
    assert code == 0
    sweep = json.loads(out)['sweep']
    assert sweep['L_schedule'] == [25.0, 50.0, 100.0, 200.0]
    assert abs(sweep['extrapolated']['rho0_limit']) <= 1e-3


def test_cache_clear(capsys, write_run_doc, cache_dir):
    path = write_run_doc()
    _run(capsys, 'sweep', '--config', str(path), '--cache-dir', str(cache_dir))
    code, out, _ = _run(capsys, 'cache-clear', '--config', str(path), '--cache-dir', str(cache_dir))
    assert code == 0
    assert json.loads(out)['removed'] == 4
    code, out, _ = _run(capsys, 'cache-clear', '--config', str(path), '--cache-dir', str(cache_dir))
    assert json.loads(out)['removed'] == 0


def test_resolve_cache_dir_precedence(monkeypatch, sample_run_doc, tmp_path):
    sample_run_doc['cache_dir'] = str(tmp_path / 'from_doc')
    config = run_config_from_dict(sample_run_doc)

    monkeypatch.delenv(CACHE_ENV_VAR, raising=False)
    assert cli.resolve_cache_dir(None, None) == DEFAULT_CACHE_DIR
    assert cli.resolve_cache_dir(None, config) == tmp_path / 'from_doc'
    monkeypatch.setenv(CACHE_ENV_VAR, str(tmp_path / 'from_env'))
    assert cli.resolve_cache_dir(None, config) == tmp_path / 'from_env'
    assert cli.resolve_cache_dir(str(tmp_path / 'from_flag'), config) == tmp_path / 'from_flag'


def test_critical(capsys, write_run_doc, cache_dir):
    path = write_run_doc({'schedule': CRITICAL_SCHEDULE})
    code, out, _ = _run(capsys, 'critical', '--config', str(path), '--rho-high', '200',
                        '--format', 'csv', '--cache-dir', str(cache_dir))
    assert code == 0
    comments, rows = _read_csv(out)
    rho_crit = float(comments['rho_crit'])
    assert float(comments['bracket_low']) < rho_crit < float(comments['bracket_high'])
    assert rows[0]['probe'] == 'low' and rows[0]['condensed'] == 'false'
    assert rows[1]['probe'] == 'high' and rows[1]['condensed'] == 'true'


def test_critical_bad_bracket_is_solver_failure(capsys, write_run_doc, cache_dir):
    path = write_run_doc({'schedule': CRITICAL_SCHEDULE})
    code, out, err = _run(capsys, 'critical', '--config', str(path), '--rho-low', '1',
                          '--rho-high', '2', '--cache-dir', str(cache_dir))
    assert code == 1
    assert out == ''
    assert _error(err)['error'] == 'bracket_error'


def test_verify_reports_failed_verdicts(capsys, write_run_doc, cache_dir, monkeypatch):
    def fake_verification(config, cache, jobs=1):
        return [
            {'suite': 'destruction_I', 'scenario': 'lambda=0', 'passed': True, 'metric': 'm', 'value': 0.0},
            {'suite': 'destruction_II', 'scenario': 'delta=1', 'passed': None, 'metric': 'm', 'value': 1.0},
            {'suite': 'limit_balance', 'scenario': 'lambda=0', 'passed': False, 'metric': 'm', 'value': 0.5},
            {'suite': 'reconstruction', 'scenario': 'delta=1', 'passed': True, 'stable': False,
             'metric': 'm', 'value': 2.0},
        ]

    monkeypatch.setattr(cli, 'run_verification', fake_verification)
    path = write_run_doc()
    code, out, _ = _run(capsys, 'verify', '--config', str(path), '--format', 'csv',
                        '--cache-dir', str(cache_dir))
    assert code == 3
    comments, rows = _read_csv(out)
    assert comments['passed'] == 'false'
    assert [row['passed'] for row in rows] == ['true', '', 'false', 'true']
    assert [row['stable'] for row in rows] == ['', '', '', 'false']


def test_verify_sample_document(capsys, write_run_doc, cache_dir):
    path = write_run_doc()
    code, out, _ = _run(capsys, 'verify', '--config', str(path), '--cache-dir', str(cache_dir))
    doc = json.loads(out)
    failed = [(v['suite'], v['scenario']) for v in doc['verdicts'] if v['passed'] is False]
    assert failed == []
    assert code == 0
    suites = {v['suite'] for v in doc['verdicts']}
    assert suites == {'destruction_I', 'bulk_only', 'destruction_II', 'reconstruction',
                      'limit_balance', 'self_consistency'}


def test_version(capsys):
    with pytest.raises(SystemExit) as excinfo:
        cli.main(['--version'])
    assert excinfo.value.code == 0
    assert 'condensate_lab' in capsys.readouterr().out
