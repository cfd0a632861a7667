"""
Tests for run document loading and validation
"""

import json

import pytest

from condensate_lab.config import DEFAULT_RUN_CONFIG_PATH
from condensate_lab.errors import ConfigError
from condensate_lab.run_config import config_fingerprint, load_run_config, run_config_from_dict


def test_sample_document_loads(sample_run_doc):
    config = run_config_from_dict(sample_run_doc)
    assert config.wire.d == 1.0 and config.wire.L == 10.0
    assert config.lattice.delta == 1.0
    assert config.physics.lam == 1.0 and config.physics.alpha == 0.5
    assert config.schedule == [25.0, 50.0, 100.0, 200.0]
    assert config.critical.bracket == (1.0, 500.0)
    assert config.verify.delta_zero_lambdas == (1.0,)
    assert config.output.format == 'json'
    assert len(config.fingerprint) == 64


def test_shipped_documents_load():
    config = load_run_config(DEFAULT_RUN_CONFIG_PATH)
    assert len(config.schedule) == 8
    assert config.schedule[0] == 25.0 and config.schedule[-1] == 400.0
    for name in ('destruction_free.json', 'delta_zero.json'):
        load_run_config(DEFAULT_RUN_CONFIG_PATH.parent / name)


def test_wire_defaults_to_largest_length(sample_run_doc):
    del sample_run_doc['wire']['L']
    assert run_config_from_dict(sample_run_doc).wire.L == 200.0


def test_geometric_schedule(sample_run_doc):
    sample_run_doc['schedule'] = {'L_min': 25, 'L_max': 400, 'count': 5}
    schedule = run_config_from_dict(sample_run_doc).schedule
    assert schedule == pytest.approx([25.0, 50.0, 100.0, 200.0, 400.0])
    assert schedule[0] == 25.0 and schedule[-1] == 400.0


def test_linear_schedule(sample_run_doc):
    sample_run_doc['schedule'] = {'L_min': 10, 'L_max': 40, 'count': 4, 'spacing': 'linear'}
    assert run_config_from_dict(sample_run_doc).schedule == pytest.approx([10.0, 20.0, 30.0, 40.0])


@pytest.mark.parametrize("section,key,value,field", [
    ('wire', 'd', 20.0, 'wire.d'),
    ('wire', 'd', -1.0, 'wire.d'),
    ('wire', 'outer_bc', 'periodic', 'wire.outer_bc'),
    ('physics', 'beta', 0.0, 'physics.beta'),
    ('physics', 'beta', 'hot', 'physics.beta'),
    ('physics', 'alpha', -0.5, 'physics.alpha'),
    ('physics', 'lambda', -1.0, 'physics.lambda'),
    ('physics', 'nu', 1.0, 'physics.nu'),
    ('lattice', 'delta', -1.0, 'lattice.delta'),
    ('lattice', 'weights', {'kind': 'random', 'low': 0.0, 'high': 2.0}, 'lattice.weights.seed'),
    ('lattice', 'weights', {'kind': 'spiral'}, 'lattice.weights.kind'),
    ('lattice', 'weights', {'kind': 'explicit', 'values': [1.0, 0.0]}, 'lattice.weights.values[1]'),
    ('bulk_method', 'method', 'spectral', 'bulk_method.method'),
    ('bulk_method', 'occupation_floor', 2.0, 'bulk_method.occupation_floor'),
    ('critical', 'rho_high', 0.5, 'critical.rho_high'),
    ('critical', 'scan_points', 2, 'critical.scan_points'),
    ('tolerances', 'balance', 0.0, 'tolerances.balance'),
    ('output', 'format', 'xml', 'output.format'),
])
def test_invalid_field(sample_run_doc, section, key, value, field):
    sample_run_doc[section][key] = value
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict(sample_run_doc)
    assert excinfo.value.field == field


def test_missing_beta(sample_run_doc):
    del sample_run_doc['physics']['beta']
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict(sample_run_doc)
    assert excinfo.value.field == 'physics.beta'


def test_fd2d_needs_fine_mesh(sample_run_doc):
    sample_run_doc['bulk_method'] = {'method': 'fd2d'}
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict(sample_run_doc)
    assert excinfo.value.field == 'bulk_method.h'
    sample_run_doc['bulk_method'] = {'method': 'fd2d', 'h': 0.25}
    with pytest.raises(ConfigError):
        run_config_from_dict(sample_run_doc)
    sample_run_doc['bulk_method'] = {'method': 'fd2d', 'h': 0.0625, 'n_lowest': 8}
    assert run_config_from_dict(sample_run_doc).bulk.h == 0.0625


@pytest.mark.parametrize("schedule,field", [
    ([25.0, 50.0, 50.0, 100.0], 'schedule'),
    ([], 'schedule'),
    ([0.5, 50.0, 100.0, 200.0], 'schedule'),
    ([25.0, 'long', 100.0, 200.0], 'schedule[1]'),
    ({'L_min': 25, 'L_max': 10, 'count': 4}, 'schedule.L_max'),
    ({'L_min': 25, 'L_max': 100, 'count': 4, 'spacing': 'cubic'}, 'schedule.spacing'),
    ('25..200', 'schedule'),
])
def test_invalid_schedule(sample_run_doc, schedule, field):
    sample_run_doc['schedule'] = schedule
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict(sample_run_doc)
    assert excinfo.value.field == field


def test_unknown_top_level_key(sample_run_doc):
    sample_run_doc['temperature'] = 300
    with pytest.raises(ConfigError) as excinfo:
        run_config_from_dict(sample_run_doc)
    assert excinfo.value.field == 'temperature'


def test_fingerprint_ignores_output_and_key_order(sample_run_doc):
    base = run_config_from_dict(sample_run_doc).fingerprint

    reordered = json.loads(json.dumps(sample_run_doc, sort_keys=True))
    reordered['output'] = {'format': 'csv', 'path': 'elsewhere.csv'}
    reordered['cache_dir'] = '/tmp/spectra'
    assert run_config_from_dict(reordered).fingerprint == base

    sample_run_doc['physics']['rho'] = 2.0
    assert run_config_from_dict(sample_run_doc).fingerprint != base


def test_config_fingerprint_canonical():
    assert config_fingerprint({'a': 1, 'b': [1.5, 2]}) == config_fingerprint({'b': [1.5, 2], 'a': 1})


def test_load_errors(tmp_path):
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(tmp_path / 'missing.json')
    assert excinfo.value.field == 'config'

    broken = tmp_path / 'broken.json'
    broken.write_text('{"wire": ')
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(broken)
    assert excinfo.value.field == 'config'

    listing = tmp_path / 'list.json'
    listing.write_text('[1, 2]')
    with pytest.raises(ConfigError) as excinfo:
        load_run_config(listing)
    assert excinfo.value.field == 'config'
