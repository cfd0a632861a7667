"""
Tests for the bulk pair spectrum: separable model and finite-difference oracle
"""

import math

import numpy as np
import pytest

from condensate_lab import bulk_spectrum as bs
from condensate_lab.bulk_spectrum import (
    Spectrum,
    WireParams,
    adaptive_cutoff,
    fd2d_extrapolated_ground,
    fd2d_spectrum,
    ground_energy_limit,
    richardson_extrapolate,
    separable_ground_energy,
    separable_spectrum,
    separable_tail_estimate,
    weyl_count,
)
from condensate_lab.errors import SpectrumError

TWO_PI_SQ = 2.0 * math.pi ** 2


def test_ground_energy_limit():
    assert ground_energy_limit(1.0) == pytest.approx(19.7392088, rel=1e-9)
    assert ground_energy_limit(2.0) == pytest.approx(TWO_PI_SQ / 4.0)


def test_separable_first_level(unit_wire):
    """Test E_{1,1} at d=1, L=10 below cutoff 25."""
    spectrum = separable_spectrum(unit_wire, 25.0)
    assert spectrum.source == 'separable'
    assert spectrum.ground == pytest.approx(19.78858, abs=1e-4)
    assert spectrum.ground == pytest.approx(TWO_PI_SQ + math.pi ** 2 / 200.0, rel=1e-14)


def test_separable_levels_complete(unit_wire):
    cutoff = 25.0
    eigs = separable_spectrum(unit_wire, cutoff).eigenvalues
    assert np.all(eigs < cutoff)
    assert np.all(np.diff(eigs) >= 0)
    # Only k = 1 fits under 25 for d = 1; m runs 1..10
    m = np.arange(1, 11)
    np.testing.assert_allclose(eigs, TWO_PI_SQ + math.pi ** 2 * m ** 2 / 200.0)


def test_separable_multiple_bands():
    wire = WireParams(d=1.0, L=3.0)
    cutoff = 100.0
    eigs = separable_spectrum(wire, cutoff).eigenvalues
    expected = sorted(
        2 * math.pi ** 2 * k ** 2 + math.pi ** 2 * m ** 2 / 18.0
        for k in range(1, 4) for m in range(1, 40)
        if 2 * math.pi ** 2 * k ** 2 + math.pi ** 2 * m ** 2 / 18.0 < cutoff
    )
    np.testing.assert_allclose(eigs, expected)


def test_neumann_ground_is_limit():
    wire = WireParams(d=1.0, L=10.0, outer_bc='neumann')
    assert separable_ground_energy(wire) == pytest.approx(TWO_PI_SQ)
    assert separable_spectrum(wire, 25.0).ground == pytest.approx(TWO_PI_SQ)


def test_cutoff_below_ground_raises(unit_wire):
    with pytest.raises(SpectrumError):
        separable_spectrum(unit_wire, 19.0)


def test_wire_validation():
    with pytest.raises(ValueError):
        WireParams(d=2.0, L=1.0)
    with pytest.raises(ValueError):
        WireParams(d=0.0, L=1.0)
    with pytest.raises(ValueError):
        WireParams(d=1.0, L=2.0, outer_bc='periodic')


def test_adaptive_cutoff_floor(unit_wire):
    """Test the first discarded level has occupation at most the floor."""
    floor = 1e-14
    cutoff = adaptive_cutoff(unit_wire, beta=2.0, occupation_floor=floor)
    ground = separable_ground_energy(unit_wire)
    assert 1.0 / math.expm1(2.0 * (cutoff - ground)) == pytest.approx(floor, rel=1e-6)


def test_weyl_count_close(unit_wire):
    cutoff = 25.0
    actual = len(separable_spectrum(unit_wire, cutoff))
    assert abs(weyl_count(unit_wire, cutoff) - actual) <= 1.0


def test_tail_estimate_bounds_discarded_levels():
    wire = WireParams(d=1.0, L=5.0)
    beta = 1.0
    ground = separable_ground_energy(wire)
    mu = ground - 0.01
    cutoff = ground + 5.0
    all_levels = separable_spectrum(wire, cutoff + 80.0).eigenvalues
    tail = all_levels[all_levels >= cutoff]
    actual = float(np.sum(1.0 / np.expm1(beta * (tail - mu)))) / wire.L
    estimate = separable_tail_estimate(wire, cutoff, mu, beta)
    assert actual <= estimate
    assert estimate < 1.0
    assert separable_tail_estimate(wire, cutoff + 10.0, mu, beta) < estimate


def test_spectrum_round_trip_dict(unit_wire):
    spectrum = separable_spectrum(unit_wire, 25.0)
    restored = Spectrum.from_dict(spectrum.to_dict())
    np.testing.assert_array_equal(restored.eigenvalues, spectrum.eigenvalues)
    assert restored.source == 'separable'
    assert restored.cutoff_energy == 25.0
    assert restored.metadata['d'] == 1.0


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

def test_fd_ground_between_bounds():
    """Test the FD ground lies between the separable value and the inscribed rectangle."""
    wire = WireParams(d=1.0, L=2.0)
    hs = [1.0 / 16.0, 1.0 / 32.0]
    value, grounds = fd2d_extrapolated_ground(wire, hs)
    inscribed = TWO_PI_SQ + math.pi ** 2 / (2.0 * (wire.L - wire.d) ** 2)
    assert all(g > TWO_PI_SQ for g in grounds)
    assert separable_ground_energy(wire) - 0.05 < value < inscribed


def test_fd_ground_decreases_with_length():
    h = 1.0 / 16.0
    grounds = [fd2d_spectrum(WireParams(d=1.0, L=L), h, 1).ground for L in (2.0, 3.0, 4.0)]
    assert grounds[0] > grounds[1] > grounds[2] > TWO_PI_SQ - 0.1


def test_fd_extrapolated_ground_approaches_limit_from_above():
    """Test Richardson-extrapolated FD grounds at L = 4, 6, 8 on h = 1/16, 1/32, 1/64."""
    hs = [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0]
    values = {}
    for L in (4.0, 6.0, 8.0):
        values[L], _ = fd2d_extrapolated_ground(WireParams(d=1.0, L=L), hs)

    assert values[4.0] > values[6.0] > values[8.0] > TWO_PI_SQ
    assert values[8.0] == pytest.approx(TWO_PI_SQ, rel=1e-2)


@pytest.mark.parametrize("L", [6.0, 8.0])
def test_fd_agrees_with_separable_for_long_wires(L):
    wire = WireParams(d=1.0, L=L)
    value, _ = fd2d_extrapolated_ground(wire, [1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0])
    assert value == pytest.approx(separable_ground_energy(wire), rel=1e-2)


def test_fd_neumann_below_dirichlet():
    h = 1.0 / 16.0
    dirichlet = fd2d_spectrum(WireParams(d=1.0, L=2.0), h, 3)
    neumann = fd2d_spectrum(WireParams(d=1.0, L=2.0, outer_bc='neumann'), h, 3)
    assert neumann.ground < dirichlet.ground
    assert np.all(neumann.eigenvalues <= dirichlet.eigenvalues)


def test_fd_shift_invert_matches_dense(monkeypatch):
    wire = WireParams(d=1.0, L=2.0)
    h = 1.0 / 16.0
    dense = fd2d_spectrum(wire, h, 4)
    assert dense.metadata['solver'] == 'dense'
    monkeypatch.setattr(bs, 'FD_DENSE_MAX_NODES', 10)
    lanczos = fd2d_spectrum(wire, h, 4)
    assert lanczos.metadata['solver'] == 'shift_invert'
    np.testing.assert_allclose(lanczos.eigenvalues, dense.eigenvalues, rtol=1e-9)


def test_fd_mesh_validation():
    wire = WireParams(d=1.0, L=2.0)
    with pytest.raises(ValueError):
        fd2d_spectrum(wire, 1.0 / 8.0, 1)
    with pytest.raises(ValueError):
        fd2d_spectrum(WireParams(d=1.0, L=2.01), 1.0 / 16.0, 1)
    with pytest.raises(SpectrumError):
        fd2d_spectrum(WireParams(d=1.0, L=1.25), 1.0 / 16.0, 200)


def test_richardson_exact_for_polynomial():
    hs = [0.1, 0.05, 0.025]
    values = [3.0 + 2.0 * h ** 2 + 5.0 * h ** 4 for h in hs]
    assert richardson_extrapolate(values, hs) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(ValueError):
        richardson_extrapolate([], [])
