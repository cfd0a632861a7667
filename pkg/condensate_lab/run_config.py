"""
Run Config Module - JSON run documents for the CLI
Loads, validates and normalizes a run document into typed parameters.
Validation failures raise ConfigError naming the dotted field path.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from .bose_statmech import PhysicalParams
from .bulk_spectrum import OUTER_BCS, WireParams
from .config import (
    BALANCE_ATOL,
    CONDENSATION_THRESHOLD,
    CRITICAL_REL_WIDTH,
    NU_DEFAULT,
    OCCUPATION_FLOOR,
    STABILITY_RTOL,
)
from .errors import ConfigError
from .graph_spectrum import WEIGHT_KINDS, LatticeSpec, WeightSpec
from .thermo import BulkSpec

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = ('wire', 'lattice', 'physics', 'bulk_method', 'schedule', 'tolerances',
                  'critical', 'verify', 'output', 'cache_dir')
OUTPUT_FORMATS = ('json', 'csv')
SPACINGS = ('linear', 'geometric')

_MISSING = object()


@dataclass(frozen=True)
class Tolerances:
    condensation: float = CONDENSATION_THRESHOLD
    balance: float = BALANCE_ATOL
    critical_rel_width: float = CRITICAL_REL_WIDTH
    stability: float = STABILITY_RTOL

    def to_dict(self) -> dict:
        return {'condensation': self.condensation, 'balance': self.balance,
                'critical_rel_width': self.critical_rel_width, 'stability': self.stability}


@dataclass(frozen=True)
class CriticalSpec:
    rho_low: float = 1.0
    rho_high: float = 1000.0
    scan_points: int = 0

    @property
    def bracket(self) -> Tuple[float, float]:
        return self.rho_low, self.rho_high

    def to_dict(self) -> dict:
        return {'rho_low': self.rho_low, 'rho_high': self.rho_high, 'scan_points': self.scan_points}


@dataclass(frozen=True)
class VerifySpec:
    """Scenario knobs for the verify command."""
    bulk_only_rho: float = 150.0
    delta_zero_lambdas: Tuple[float, ...] = (0.1, 1.0, 10.0)
    # rho for the condition-met scenario, as a fraction of bound / delta
    condition_fraction: float = 0.5
    toy_length: float = 3.0

    def to_dict(self) -> dict:
        return {'bulk_only_rho': self.bulk_only_rho,
                'delta_zero_lambdas': list(self.delta_zero_lambdas),
                'condition_fraction': self.condition_fraction,
                'toy_length': self.toy_length}


@dataclass(frozen=True)
class OutputSpec:
    format: str = 'json'
    path: Optional[str] = None


@dataclass
class RunConfig:
    wire: WireParams
    lattice: LatticeSpec
    physics: PhysicalParams
    bulk: BulkSpec
    schedule: List[float]
    tolerances: Tolerances = field(default_factory=Tolerances)
    critical: CriticalSpec = field(default_factory=CriticalSpec)
    verify: VerifySpec = field(default_factory=VerifySpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    cache_dir: Optional[str] = None
    document: dict = field(default_factory=dict)
    fingerprint: str = ''


def config_fingerprint(doc: dict) -> str:
    """sha256 of the canonical (sorted-key, compact) JSON of a document."""
    canonical = json.dumps(doc, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


# ---------------------------------------------------------------------------
# Field readers
# ---------------------------------------------------------------------------

def _section(doc: dict, key: str) -> dict:
    value = doc.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(key, "must be an object")
    return value


def _number(section: dict, key: str, path: str, default=_MISSING) -> float:
    value = section.get(key, default)
    if value is _MISSING:
        raise ConfigError(path, "is required")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    return value


def _optional_number(section: dict, key: str, path: str) -> Optional[float]:
    if section.get(key) is None:
        return None
    return _number(section, key, path)


def _integer(section: dict, key: str, path: str, default=_MISSING) -> int:
    value = section.get(key, default)
    if value is _MISSING:
        raise ConfigError(path, "is required")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"must be an integer, got {value!r}")
    return value


def _check(condition: bool, path: str, message: str):
    if not condition:
        raise ConfigError(path, message)


# ---------------------------------------------------------------------------
# Sections
# ---------------------------------------------------------------------------

def _parse_schedule(doc: dict) -> List[float]:
    raw = doc.get('schedule')
    if raw is None:
        raise ConfigError('schedule', "is required")
    if isinstance(raw, list):
        _check(len(raw) > 0, 'schedule', "must not be empty")
        lengths = []
        for i, value in enumerate(raw):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f'schedule[{i}]', f"must be a number, got {value!r}")
            lengths.append(float(value))
    elif isinstance(raw, dict):
        L_min = _number(raw, 'L_min', 'schedule.L_min')
        L_max = _number(raw, 'L_max', 'schedule.L_max')
        count = _integer(raw, 'count', 'schedule.count')
        spacing = raw.get('spacing', 'geometric')
        _check(spacing in SPACINGS, 'schedule.spacing', f"must be one of {SPACINGS}")
        _check(L_min > 0, 'schedule.L_min', "must be positive")
        _check(L_max > L_min, 'schedule.L_max', "must exceed L_min")
        _check(count >= 1, 'schedule.count', "must be >= 1")
        grid = np.geomspace(L_min, L_max, count) if spacing == 'geometric' else np.linspace(L_min, L_max, count)
        lengths = [float(L) for L in grid]
        # Pin the endpoints against round-off
        lengths[0], lengths[-1] = L_min, L_max if count > 1 else L_min
    else:
        raise ConfigError('schedule', "must be a list of lengths or a {L_min, L_max, count, spacing} object")

    _check(all(math.isfinite(L) and L > 0 for L in lengths), 'schedule', "lengths must be positive")
    _check(all(b > a for a, b in zip(lengths, lengths[1:])), 'schedule', "must be strictly increasing")
    return lengths


def _parse_wire(doc: dict, schedule: List[float]) -> WireParams:
    section = _section(doc, 'wire')
    d = _number(section, 'd', 'wire.d')
    _check(d > 0, 'wire.d', "must be positive")
    L = _optional_number(section, 'L', 'wire.L')
    if L is None:
        L = schedule[-1]
    _check(d < L, 'wire.d', f"must be smaller than the wire length L={L}")
    outer_bc = section.get('outer_bc', 'dirichlet')
    _check(outer_bc in OUTER_BCS, 'wire.outer_bc', f"must be one of {OUTER_BCS}")
    _check(schedule[0] > d, 'schedule', f"every length must exceed d={d}")
    return WireParams(d=d, L=L, outer_bc=outer_bc)


def _parse_weights(section: dict) -> WeightSpec:
    path = 'lattice.weights'
    weights_doc = section.get('weights', {'kind': 'constant', 'value': 1.0})
    if not isinstance(weights_doc, dict):
        raise ConfigError(path, "must be an object")
    kind = weights_doc.get('kind', 'constant')
    _check(kind in WEIGHT_KINDS, f'{path}.kind', f"must be one of {WEIGHT_KINDS}")

    if kind == 'constant':
        value = _number(weights_doc, 'value', f'{path}.value', 1.0)
        _check(value > 0, f'{path}.value', "must be positive")
        return WeightSpec(kind='constant', value=value)
    if kind == 'explicit':
        values = weights_doc.get('values')
        _check(isinstance(values, list), f'{path}.values', "must be a list of numbers")
        for i, v in enumerate(values):
            _check(not isinstance(v, bool) and isinstance(v, (int, float)) and v > 0,
                   f'{path}.values[{i}]', "must be a positive number")
        return WeightSpec(kind='explicit', values=tuple(float(v) for v in values))
    if kind == 'reciprocal':
        scale = _number(weights_doc, 'scale', f'{path}.scale', 1.0)
        offset = _number(weights_doc, 'offset', f'{path}.offset', 0.0)
        power = _number(weights_doc, 'power', f'{path}.power', 1.0)
        _check(scale > 0, f'{path}.scale', "must be positive")
        _check(offset > -1.0, f'{path}.offset', "must exceed -1")
        return WeightSpec(kind='reciprocal', scale=scale, offset=offset, power=power)

    low = _number(weights_doc, 'low', f'{path}.low', 0.0)
    high = _number(weights_doc, 'high', f'{path}.high', 1.0)
    _check(low >= 0, f'{path}.low', "must be >= 0")
    _check(high > low, f'{path}.high', "must exceed low")
    seed = weights_doc.get('seed')
    _check(not isinstance(seed, bool) and isinstance(seed, int), f'{path}.seed',
           "random weights need an explicit integer seed")
    return WeightSpec(kind='random', low=low, high=high, seed=seed)


def _parse_lattice(doc: dict) -> LatticeSpec:
    section = _section(doc, 'lattice')
    delta = _number(section, 'delta', 'lattice.delta', 1.0)
    _check(delta >= 0, 'lattice.delta', "must be >= 0")
    growth = _optional_number(section, 'growth_exponent', 'lattice.growth_exponent')
    if growth is not None:
        _check(growth > 1, 'lattice.growth_exponent', "must exceed 1")
    count = None
    if section.get('count') is not None:
        count = _integer(section, 'count', 'lattice.count')
        _check(count >= 1, 'lattice.count', "must be >= 1")
    absent = section.get('absent', False)
    _check(isinstance(absent, bool), 'lattice.absent', "must be true or false")
    return LatticeSpec(delta=delta, weight_spec=_parse_weights(section),
                       growth_exponent=growth, count=count, absent=absent)


def _parse_physics(doc: dict) -> PhysicalParams:
    section = _section(doc, 'physics')
    beta = _number(section, 'beta', 'physics.beta')
    alpha = _number(section, 'alpha', 'physics.alpha', 0.0)
    lam = _number(section, 'lambda', 'physics.lambda', 0.0)
    rho = _number(section, 'rho', 'physics.rho', 1.0)
    nu = _number(section, 'nu', 'physics.nu', NU_DEFAULT)
    _check(beta > 0, 'physics.beta', "must be positive")
    _check(alpha >= 0, 'physics.alpha', "must be >= 0")
    _check(lam >= 0, 'physics.lambda', "must be >= 0")
    _check(rho > 0, 'physics.rho', "must be positive")
    _check(nu > 1, 'physics.nu', "must exceed 1")
    return PhysicalParams(beta=beta, alpha=alpha, lam=lam, rho=rho, nu=nu)


def _parse_bulk(doc: dict, wire: WireParams) -> BulkSpec:
    section = _section(doc, 'bulk_method')
    method = section.get('method', 'separable')
    _check(method in ('separable', 'fd2d'), 'bulk_method.method', "must be separable or fd2d")
    floor = _number(section, 'occupation_floor', 'bulk_method.occupation_floor', OCCUPATION_FLOOR)
    _check(0 < floor < 1, 'bulk_method.occupation_floor', "must lie in (0, 1)")
    cutoff = _optional_number(section, 'cutoff', 'bulk_method.cutoff')
    if cutoff is not None:
        _check(cutoff > 0, 'bulk_method.cutoff', "must be positive")
    h = _optional_number(section, 'h', 'bulk_method.h')
    n_lowest = _integer(section, 'n_lowest', 'bulk_method.n_lowest', 64)
    _check(n_lowest >= 1, 'bulk_method.n_lowest', "must be >= 1")
    if method == 'fd2d':
        _check(h is not None, 'bulk_method.h', "is required for fd2d")
        _check(0 < h < wire.d / 8.0, 'bulk_method.h', f"must satisfy 0 < h < d/8 = {wire.d / 8.0}")
    return BulkSpec(method=method, occupation_floor=floor, cutoff=cutoff, h=h, n_lowest=n_lowest)


def _parse_tolerances(doc: dict) -> Tolerances:
    section = _section(doc, 'tolerances')
    defaults = Tolerances()
    values = {}
    for key in ('condensation', 'balance', 'critical_rel_width', 'stability'):
        value = _number(section, key, f'tolerances.{key}', getattr(defaults, key))
        _check(value > 0, f'tolerances.{key}', "must be positive")
        values[key] = value
    return Tolerances(**values)


def _parse_critical(doc: dict) -> CriticalSpec:
    section = _section(doc, 'critical')
    rho_low = _number(section, 'rho_low', 'critical.rho_low', CriticalSpec.rho_low)
    rho_high = _number(section, 'rho_high', 'critical.rho_high', CriticalSpec.rho_high)
    scan_points = _integer(section, 'scan_points', 'critical.scan_points', 0)
    _check(rho_low > 0, 'critical.rho_low', "must be positive")
    _check(rho_high > rho_low, 'critical.rho_high', "must exceed rho_low")
    _check(scan_points == 0 or scan_points >= 3, 'critical.scan_points', "must be 0 or >= 3")
    return CriticalSpec(rho_low=rho_low, rho_high=rho_high, scan_points=scan_points)


def _parse_verify(doc: dict, wire: WireParams) -> VerifySpec:
    section = _section(doc, 'verify')
    defaults = VerifySpec()
    bulk_only_rho = _number(section, 'bulk_only_rho', 'verify.bulk_only_rho', defaults.bulk_only_rho)
    _check(bulk_only_rho > 0, 'verify.bulk_only_rho', "must be positive")
    lambdas = section.get('delta_zero_lambdas', list(defaults.delta_zero_lambdas))
    _check(isinstance(lambdas, list) and len(lambdas) > 0, 'verify.delta_zero_lambdas',
           "must be a nonempty list")
    for i, lam in enumerate(lambdas):
        _check(not isinstance(lam, bool) and isinstance(lam, (int, float)) and lam > 0,
               f'verify.delta_zero_lambdas[{i}]', "must be a positive number")
    fraction = _number(section, 'condition_fraction', 'verify.condition_fraction',
                       defaults.condition_fraction)
    _check(0 < fraction < 1, 'verify.condition_fraction', "must lie in (0, 1)")
    toy_length = _number(section, 'toy_length', 'verify.toy_length', defaults.toy_length)
    _check(toy_length > wire.d, 'verify.toy_length', f"must exceed d={wire.d}")
    return VerifySpec(bulk_only_rho=bulk_only_rho,
                      delta_zero_lambdas=tuple(float(x) for x in lambdas),
                      condition_fraction=fraction, toy_length=toy_length)


def _parse_output(doc: dict) -> OutputSpec:
    section = _section(doc, 'output')
    fmt = section.get('format', 'json')
    _check(fmt in OUTPUT_FORMATS, 'output.format', f"must be one of {OUTPUT_FORMATS}")
    path = section.get('path')
    _check(path is None or isinstance(path, str), 'output.path', "must be a string")
    return OutputSpec(format=fmt, path=path)


def run_config_from_dict(doc: dict) -> RunConfig:
    """
    Validate a run document and build a RunConfig.

    Raises:
        ConfigError: on the first invalid field
    """
    if not isinstance(doc, dict):
        raise ConfigError('config', "run document must be a JSON object")
    for key in doc:
        _check(key in TOP_LEVEL_KEYS, key, "unknown key")

    schedule = _parse_schedule(doc)
    wire = _parse_wire(doc, schedule)
    lattice = _parse_lattice(doc)
    physics = _parse_physics(doc)
    bulk = _parse_bulk(doc, wire)
    tolerances = _parse_tolerances(doc)
    critical = _parse_critical(doc)
    verify = _parse_verify(doc, wire)
    output = _parse_output(doc)
    cache_dir = doc.get('cache_dir')
    _check(cache_dir is None or isinstance(cache_dir, str), 'cache_dir', "must be a string")

    # Output and cache locations do not change results; they stay out of the fingerprint
    normalized = {
        'wire': wire.to_dict(),
        'lattice': lattice.to_dict(),
        'physics': physics.to_dict(),
        'bulk_method': bulk.to_dict(),
        'schedule': schedule,
        'tolerances': tolerances.to_dict(),
        'critical': critical.to_dict(),
        'verify': verify.to_dict(),
    }
    return RunConfig(
        wire=wire,
        lattice=lattice,
        physics=physics,
        bulk=bulk,
        schedule=schedule,
        tolerances=tolerances,
        critical=critical,
        verify=verify,
        output=output,
        cache_dir=cache_dir,
        document=normalized,
        fingerprint=config_fingerprint(normalized),
    )


def load_run_config(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            doc = json.load(f)
    except FileNotFoundError:
        raise ConfigError('config', f"run document not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError('config', f"invalid JSON in {path}: {e}")
    config = run_config_from_dict(doc)
    logger.info(f"Loaded run document {path.name} (fingerprint {config.fingerprint[:12]})")
    return config
