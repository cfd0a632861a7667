"""
Tests for the on-disk spectrum cache
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from condensate_lab.bulk_spectrum import WireParams, separable_spectrum
from condensate_lab.spectrum_cache import (
    SpectrumCache,
    spectrum_cache_fetch_or_compute,
    spectrum_fingerprint,
)


def test_miss_then_hit(cache_dir, unit_wire):
    cache = SpectrumCache(cache_dir)
    first = cache.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)
    second = cache.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)

    assert cache.get_stats()['misses'] == 1
    assert cache.get_stats()['hits'] == 1
    np.testing.assert_array_equal(first.eigenvalues, second.eigenvalues)
    np.testing.assert_array_equal(first.eigenvalues, separable_spectrum(unit_wire, 25.0).eigenvalues)
    assert second.metadata['fingerprint'] == first.metadata['fingerprint']


def test_documents_persist_across_instances(cache_dir, unit_wire):
    SpectrumCache(cache_dir).fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)
    fresh = SpectrumCache(cache_dir)
    fresh.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)
    assert fresh.hits == 1 and fresh.misses == 0


def test_no_temp_files_left(cache_dir, unit_wire):
    SpectrumCache(cache_dir).fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)
    names = [p.name for p in cache_dir.iterdir()]
    assert len(names) == 1
    assert not any(name.startswith('.tmp-') for name in names)


def test_fingerprint_depends_on_parameters(unit_wire):
    base = spectrum_fingerprint(unit_wire, 'separable', {'cutoff_energy': 25.0})
    assert base == spectrum_fingerprint(unit_wire, 'separable', {'cutoff_energy': 25.0})
    assert base != spectrum_fingerprint(unit_wire, 'separable', {'cutoff_energy': 26.0})
    assert base != spectrum_fingerprint(unit_wire.with_length(11.0), 'separable', {'cutoff_energy': 25.0})
    assert base != spectrum_fingerprint(unit_wire, 'fd2d', {'cutoff_energy': 25.0})


def test_corrupt_entry_is_recomputed(cache_dir, unit_wire, caplog):
    cache = SpectrumCache(cache_dir)
    spectrum = cache.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)
    path = cache.path_for(spectrum.metadata['fingerprint'])
    path.write_text('{"fingerprint": "trunc')

    with caplog.at_level(logging.WARNING):
        again = cache.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)
    assert cache.recomputed == 1
    assert 'Corrupt cache entry' in caplog.text
    np.testing.assert_array_equal(again.eigenvalues, spectrum.eigenvalues)
    # The rewritten document loads cleanly
    assert SpectrumCache(cache_dir).fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0).ground == spectrum.ground


def test_fd2d_entries(cache_dir):
    wire = WireParams(d=1.0, L=2.0)
    cache = SpectrumCache(cache_dir)
    spectrum = cache.fetch_or_compute(wire, 'fd2d', h=1.0 / 16.0, n_lowest=2)
    assert spectrum.source == 'fd2d'
    assert spectrum.mesh_h == 1.0 / 16.0
    assert len(spectrum) == 2


def test_clear(cache_dir, unit_wire):
    cache = SpectrumCache(cache_dir)
    assert cache.clear() == 0
    cache.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)
    cache.fetch_or_compute(unit_wire.with_length(20.0), 'separable', cutoff_energy=25.0)
    assert cache.clear() == 2
    assert list(cache_dir.glob('*.json')) == []


def test_module_level_helper(cache_dir, unit_wire):
    spectrum = spectrum_cache_fetch_or_compute(unit_wire, 'separable', {'cutoff_energy': 25.0}, cache_dir)
    assert spectrum.ground > 19.7
    assert len(list(cache_dir.glob('*.json'))) == 1


def test_counters_under_concurrent_fetches(cache_dir, unit_wire):
    """Test that hits from worker threads are all counted"""
    cache = SpectrumCache(cache_dir)
    cache.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0)

    def fetch(_):
        return cache.fetch_or_compute(unit_wire, 'separable', cutoff_energy=25.0).ground

    with ThreadPoolExecutor(max_workers=8) as pool:
        grounds = list(pool.map(fetch, range(200)))

    stats = cache.get_stats()
    assert stats['misses'] == 1
    assert stats['hits'] == 200
    assert len(set(grounds)) == 1
