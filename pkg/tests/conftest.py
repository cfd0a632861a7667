"""
Shared fixtures for the Condensate Lab tests
"""

import copy
import json
import os
import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

# Add package to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from condensate_lab.bose_statmech import PhysicalParams
from condensate_lab.bulk_spectrum import WireParams
from condensate_lab.graph_spectrum import LatticeSpec

np.seterr(all="warn")

hypothesis.settings.register_profile("ci", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

TESTS_DIR = Path(__file__).parent
SAMPLE_RUN_PATH = TESTS_DIR / 'sample_run.json'


@pytest.fixture
def sample_run_doc():
    with open(SAMPLE_RUN_PATH, 'r') as f:
        return json.load(f)


@pytest.fixture
def write_run_doc(tmp_path, sample_run_doc):
    """Write a (modified) copy of the sample run document and return its path."""
    def _write(updates=None, name='run.json'):
        doc = copy.deepcopy(sample_run_doc)
        for section, values in (updates or {}).items():
            if isinstance(values, dict) and isinstance(doc.get(section), dict):
                doc[section].update(values)
            else:
                doc[section] = values
        path = tmp_path / name
        with open(path, 'w') as f:
            json.dump(doc, f)
        return path
    return _write


@pytest.fixture
def unit_wire():
    return WireParams(d=1.0, L=10.0)


@pytest.fixture
def unit_lattice_spec():
    return LatticeSpec(delta=1.0)


@pytest.fixture
def free_params():
    return PhysicalParams(beta=1.0, alpha=1.0, lam=0.0, rho=1.0)


@pytest.fixture
def interacting_params():
    return PhysicalParams(beta=1.0, alpha=0.5, lam=1.0, rho=1.0)


@pytest.fixture
def cache_dir(tmp_path):
    return tmp_path / 'spectra'
