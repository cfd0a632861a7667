"""
Config Module - Centralized configuration for Condensate Lab
"""

import os
from pathlib import Path

# Project root directory
PROJECT_ROOT = Path(__file__).parent.parent

TOOL_NAME = 'condensate_lab'
TOOL_VERSION = '1.0'

# Cache paths
CACHE_ENV_VAR = 'CONDENSATE_LAB_CACHE'
DEFAULT_CACHE_DIR = PROJECT_ROOT / '.spectrum_cache'
CACHE_DIR = Path(os.environ.get(CACHE_ENV_VAR, DEFAULT_CACHE_DIR))

# Example run documents
CONFIG_DIR = PROJECT_ROOT / 'config'
DEFAULT_RUN_CONFIG_PATH = CONFIG_DIR / 'default_run.json'

# Graph spectrum
TOL_EIG = 1e-12

# Bulk spectrum
# Occupation of the first discarded bulk level, at the largest admissible mu
OCCUPATION_FLOOR = 1e-14
FD_MIN_STEPS_PER_D = 8
FD_DENSE_MAX_NODES = 1500
FD_EIGSH_TOL = 1e-12
FD_EIGSH_MAXITER = 20000

# Statistical mechanics
MU_GAP_XTOL = 1e-15  # on log(gap)
SURFACE_GAP_XTOL = 1e-15  # on log(surface gap)
DENSITY_RTOL = 1e-10
FIXED_POINT_ATOL = 1e-12
BRACKET_MAX_DOUBLINGS = 200
ROOT_MAX_ITER = 500
TAIL_RTOL = 1e-13

# Thermodynamic limit
RHO_EXC_TERM_RTOL = 1e-16
RHO_EXC_QUAD_EPSREL = 1e-12
CONDENSATION_THRESHOLD = 1e-3  # epsilon_cond on extrapolated rho_0
EXTRAPOLATION_MIN_POINTS = 4
BALANCE_ATOL = 1e-3
NU_DEFAULT = 2.0
CRITICAL_REL_WIDTH = 1e-2
CRITICAL_MAX_STEPS = 60
STABILITY_RTOL = 0.1

# Parallel per-L solves
DEFAULT_JOBS = 1

# CLI exit codes
EXIT_OK = 0
EXIT_SOLVER_FAILURE = 1
EXIT_CONFIG_INVALID = 2
EXIT_VERDICT_FAILURE = 3

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
