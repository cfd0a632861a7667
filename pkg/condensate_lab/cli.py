"""
CLI Module - Command-line entry point for Condensate Lab
Subcommands: spectrum, solve, sweep, verify, critical, cache-clear.

Results go to --output (or stdout) as JSON or CSV; errors go to stderr as a
JSON document and map to exit codes 0 ok, 1 solver failure, 2 config
invalid, 3 verdict failure.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .bose_statmech import (
    PhysicalParams,
    brute_force_grid_solve,
    macroscopic_occupation_diagnostics,
    solve_mu,
)
from .bulk_spectrum import adaptive_cutoff, ground_energy_limit, separable_spectrum
from .config import (
    CACHE_ENV_VAR,
    DEFAULT_CACHE_DIR,
    DEFAULT_JOBS,
    EXIT_CONFIG_INVALID,
    EXIT_OK,
    EXIT_SOLVER_FAILURE,
    EXIT_VERDICT_FAILURE,
    LOG_FORMAT,
    TOOL_NAME,
    TOOL_VERSION,
)
from .errors import ConfigError, LabError
from .graph_spectrum import LatticeSpec, graph_spectrum, unit_path_eigenvalues
from .run_config import RunConfig, load_run_config
from .spectrum_cache import SpectrumCache
from .thermo import (
    check_balance,
    check_bulk_only,
    check_destruction_I,
    check_destruction_II,
    check_reconstruction,
    find_critical_density,
    run_sweep,
    solve_at_length,
)

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ('L', 'n_L', 'mu', 'rho_s', 'rho0', 'ground_occupation', 'balance_residual')
VERDICT_COLUMNS = ('suite', 'scenario', 'passed', 'stable', 'metric', 'value')
CRITICAL_COLUMNS = ('step', 'probe', 'rho', 'rho0_limit', 'condensed', 'low', 'high')
SOLUTION_COLUMNS = ('L', 'n_defects', 'mu', 'rho_s', 'rho0', 'ground_occupation', 'surface_density',
                    'bulk_density', 'bulk_excited_density', 'density_residual',
                    'fixed_point_residual', 'bulk_tail', 'iterations')


class Result:
    """A command's output: JSON payload plus the CSV view of it."""

    def __init__(self, payload: dict, columns: Sequence[str], rows: Iterable[dict],
                 comments: Optional[dict] = None, exit_code: int = EXIT_OK):
        self.payload = payload
        self.columns = list(columns)
        self.rows = list(rows)
        self.comments = comments or {}
        self.exit_code = exit_code


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def to_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=_json_default) + '\n'


def _csv_cell(value) -> str:
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def to_csv(meta: dict, comments: dict, columns: Sequence[str], rows: Iterable[dict]) -> str:
    buffer = io.StringIO()
    for key, value in list(meta.items()) + list(comments.items()):
        buffer.write(f"# {key}={_csv_cell(value)}\n")
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_csv_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


def _meta(config: RunConfig, command: str) -> dict:
    return {'tool': TOOL_NAME, 'version': TOOL_VERSION,
            'config_fingerprint': config.fingerprint, 'command': command}


def _write(text: str, path: Optional[str]):
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    with open(target, 'w', encoding='utf-8', newline='') as f:
        f.write(text)
    logger.info(f"Wrote {target}")


def emit_error(error: LabError):
    sys.stderr.write(json.dumps(error.to_dict(), sort_keys=True, default=_json_default) + '\n')
    sys.stderr.flush()


def resolve_cache_dir(flag: Optional[str], config: Optional[RunConfig]) -> Path:
    """--cache-dir, then the environment, then the run document, then the default."""
    if flag:
        return Path(flag)
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    if config is not None and config.cache_dir:
        return Path(config.cache_dir)
    return DEFAULT_CACHE_DIR


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _length(args, config: RunConfig) -> float:
    L = config.wire.L if args.length is None else float(args.length)
    if not L > config.wire.d:
        raise ConfigError('length', f"must exceed d={config.wire.d}, got {L}")
    return L


def cmd_spectrum(args, config: RunConfig, cache: SpectrumCache) -> Result:
    L = _length(args, config)
    if args.which == 'graph':
        lattice = config.lattice.lattice_at(L)
        if lattice is None:
            raise ConfigError('lattice.absent', "graph spectrum needs a defect lattice")
        spectrum = graph_spectrum(lattice)
        payload = {'spectrum': spectrum.to_dict(), 'L': L}
        comments = {'which': 'graph', 'L': L, 'count': spectrum.count, 'driver': spectrum.driver}
    else:
        spectrum = config.bulk.spectrum_at(config.wire.with_length(L), config.physics.beta, cache)
        payload = {'spectrum': spectrum.to_dict(), 'L': L}
        comments = {'which': 'bulk', 'L': L, 'source': spectrum.source,
                    'cutoff': spectrum.cutoff_energy}
    rows = [{'index': i, 'eigenvalue': float(e)} for i, e in enumerate(spectrum.eigenvalues)]
    return Result(payload, ('index', 'eigenvalue'), rows, comments)


def cmd_solve(args, config: RunConfig, cache: SpectrumCache) -> Result:
    L = _length(args, config)
    solution = solve_at_length(L, config.lattice, config.wire, config.physics, config.bulk, cache)
    payload = {
        'solution': solution.to_dict(include_occupations=True),
        'params': config.physics.to_dict(),
        'macroscopic_occupation': macroscopic_occupation_diagnostics(solution),
    }
    row = solution.to_dict(include_occupations=False)
    return Result(payload, SOLUTION_COLUMNS, [row])


def cmd_sweep(args, config: RunConfig, cache: SpectrumCache) -> Result:
    sweep = run_sweep(config.schedule, config.lattice, config.wire, config.physics,
                      config.bulk, cache, args.jobs)
    comments = dict(sweep.extrapolated)
    comments.update({'rho_exc': sweep.rho_exc_value, 'fit_error': sweep.fit_error,
                     'identity_residual': sweep.identity_residual})
    return Result({'sweep': sweep.to_dict()}, SWEEP_COLUMNS, sweep.rows(), comments)


def cmd_critical(args, config: RunConfig, cache: SpectrumCache) -> Result:
    low = config.critical.rho_low if args.rho_low is None else args.rho_low
    high = config.critical.rho_high if args.rho_high is None else args.rho_high
    if not 0 < low < high:
        raise ConfigError('critical', f"bracket must satisfy 0 < rho_low < rho_high, got ({low}, {high})")
    result = find_critical_density(
        config.lattice, config.wire, config.physics, (low, high), config.schedule,
        config.bulk, cache, args.jobs, config.tolerances.condensation,
        config.tolerances.critical_rel_width, config.critical.scan_points,
    )
    comments = {'rho_crit': result.rho_crit, 'bracket_low': result.bracket[0],
                'bracket_high': result.bracket[1]}
    return Result({'critical': result.to_dict()}, CRITICAL_COLUMNS, result.history, comments)


def _self_consistency(config: RunConfig) -> dict:
    """Root-finder solution against the brute-force grid on a three-defect toy system."""
    L = config.verify.toy_length
    wire = config.wire.with_length(L)
    params = config.physics.with_rho(1.0)
    levels = separable_spectrum(wire, adaptive_cutoff(wire, params.beta)).eigenvalues[:5]
    eigs = unit_path_eigenvalues(3)
    solution = solve_mu(params.rho, levels, None, params, L, graph_eigs=eigs)
    mu_range = (solution.mu - 0.5, min(solution.mu + 0.5, float(levels[0]) - 1e-9))
    grid = brute_force_grid_solve(params.rho, levels, eigs, params, L, mu_range,
                                  (0.0, 2.0 * solution.rho_s + 1.0))
    difference = abs(grid['mu'] - solution.mu)
    passed = (difference <= 10.0 * max(grid['mu_step'], grid['rho_s_step'])
              and abs(solution.density_residual) <= 1e-10
              and solution.fixed_point_residual <= 1e-12)
    return {'suite': 'self_consistency', 'scenario': 'toy n=3', 'passed': passed,
            'metric': 'mu_difference', 'value': difference,
            'solver_mu': solution.mu, 'grid_mu': grid['mu'], 'grid_step': grid['mu_step']}


def run_verification(config: RunConfig, cache: SpectrumCache, jobs: int = DEFAULT_JOBS) -> List[dict]:
    """Every scripted verdict for the run document; one record per suite and scenario."""
    tol = config.tolerances
    params = config.physics
    lattice = config.lattice
    wire = config.wire
    delta = lattice.delta if lattice.delta > 0 else 1.0
    finite_lattice = LatticeSpec(delta=delta, weight_spec=lattice.weight_spec)
    verdicts = []
    balance_sweeps = []

    # Non-interacting chain
    free = PhysicalParams(beta=params.beta, alpha=params.alpha, lam=0.0, rho=params.rho, nu=params.nu)
    sweep = run_sweep(config.schedule, finite_lattice, wire, free, config.bulk, cache, jobs)
    bulk_only = check_bulk_only(config.schedule, wire, free.with_rho(config.verify.bulk_only_rho),
                                config.bulk, cache, jobs, tol.condensation)
    verdict = check_destruction_I(sweep, tol.condensation)
    verdict.update({'scenario': f'lambda=0 delta={delta:g}', 'metric': 'ground_ratio_limit',
                    'value': verdict['states']['n=0']['extrapolated']})
    verdicts.append(verdict)
    bulk_only.update({'scenario': f"rho={config.verify.bulk_only_rho:g}", 'metric': 'ground_ratio_limit',
                      'value': bulk_only['ground_ratio_limit']})
    verdicts.append(bulk_only)
    balance_sweeps.append(('lambda=0', sweep))

    # Interacting, delta = 0 for each lambda
    for lam in config.verify.delta_zero_lambdas:
        interacting = PhysicalParams(beta=params.beta, alpha=params.alpha, lam=lam,
                                     rho=params.rho, nu=params.nu)
        zero_lattice = LatticeSpec(delta=0.0, weight_spec=lattice.weight_spec,
                                   growth_exponent=lattice.growth_exponent)
        sweep = run_sweep(config.schedule, zero_lattice, wire, interacting, config.bulk, cache, jobs)
        verdict = check_destruction_II(sweep, tol.condensation)
        verdict.update({'scenario': f'delta=0 lambda={lam:g}', 'metric': 'rho0_limit',
                        'value': verdict['rho0_limit']})
        verdicts.append(verdict)
        balance_sweeps.append((f'delta=0 lambda={lam:g}', sweep))

    lam = params.lam if params.lam > 0 else 1.0
    interacting = PhysicalParams(beta=params.beta, alpha=params.alpha, lam=lam, rho=params.rho, nu=params.nu)

    # Interacting, delta > 0 with the destruction condition met
    bound = (ground_energy_limit(wire.d) + params.alpha) / (params.nu * lam)
    rho_met = config.verify.condition_fraction * bound / delta
    sweep = run_sweep(config.schedule, finite_lattice, wire, interacting.with_rho(rho_met),
                      config.bulk, cache, jobs)
    verdict = check_destruction_II(sweep, tol.condensation)
    verdict.update({'scenario': f'delta={delta:g} rho={rho_met:.6g}', 'metric': 'rho0_limit',
                    'value': verdict['rho0_limit']})
    verdicts.append(verdict)
    balance_sweeps.append((f'delta={delta:g} condition met', sweep))

    verdict = check_reconstruction(finite_lattice, wire, interacting, config.critical.bracket,
                                   config.schedule, config.bulk, cache, jobs, tol.condensation,
                                   tol.stability, tol.critical_rel_width)
    verdict.update({'scenario': f'delta={delta:g} lambda={lam:g}', 'metric': 'rho_crit',
                    'value': verdict['rho_crit']})
    verdicts.append(verdict)

    for scenario, sweep in balance_sweeps:
        verdict = check_balance(sweep, tol.balance)
        verdict.update({'scenario': scenario, 'metric': 'balance_residual',
                        'value': verdict['balance_residual']})
        verdicts.append(verdict)

    verdicts.append(_self_consistency(config))
    return verdicts


def cmd_verify(args, config: RunConfig, cache: SpectrumCache) -> Result:
    verdicts = run_verification(config, cache, args.jobs)
    failed = [v for v in verdicts if v['passed'] is False]
    for v in failed:
        logger.warning(f"verdict failed: {v['suite']} ({v['scenario']})")
    payload = {'verdicts': verdicts, 'passed': not failed}
    exit_code = EXIT_VERDICT_FAILURE if failed else EXIT_OK
    comments = {'passed': not failed}
    return Result(payload, VERDICT_COLUMNS, verdicts, comments, exit_code)


def cmd_cache_clear(args, config: RunConfig, cache: SpectrumCache) -> Result:
    removed = cache.clear()
    payload = {'removed': removed, 'cache_dir': str(cache.cache_dir)}
    return Result(payload, ('removed', 'cache_dir'), [payload])


COMMANDS = {
    'spectrum': cmd_spectrum,
    'solve': cmd_solve,
    'sweep': cmd_sweep,
    'verify': cmd_verify,
    'critical': cmd_critical,
    'cache-clear': cmd_cache_clear,
}


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', required=True, help='Run document (JSON)')
    common.add_argument('--output', default=None, help='Output file (default: stdout)')
    common.add_argument('--format', choices=('csv', 'json'), default=None,
                        help='Output format (default: from the run document)')
    common.add_argument('--cache-dir', default=None,
                        help=f'Spectrum cache directory (overrides ${CACHE_ENV_VAR})')
    common.add_argument('--jobs', type=int, default=DEFAULT_JOBS, help='Parallel per-L solves')
    common.add_argument('--log-level', default='WARNING',
                        choices=('DEBUG', 'INFO', 'WARNING', 'ERROR'))

    parser = argparse.ArgumentParser(prog=TOOL_NAME, description='Electron-pair condensation on a wire with surface defects')
    parser.add_argument('--version', action='version', version=f'{TOOL_NAME} {TOOL_VERSION}')
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('spectrum', parents=[common], help='Bulk or graph eigenvalues at one length')
    p.add_argument('--which', choices=('bulk', 'graph'), default='bulk')
    p.add_argument('--length', type=float, default=None, help='Wire length (default: wire.L)')

    p = sub.add_parser('solve', parents=[common], help='Grand-canonical solve at one length')
    p.add_argument('--length', type=float, default=None, help='Wire length (default: wire.L)')

    sub.add_parser('sweep', parents=[common], help='Sweep the schedule and extrapolate')
    sub.add_parser('verify', parents=[common], help='Run the destruction / reconstruction suites')

    p = sub.add_parser('critical', parents=[common], help='Bisect for the critical density')
    p.add_argument('--rho-low', type=float, default=None)
    p.add_argument('--rho-high', type=float, default=None)

    sub.add_parser('cache-clear', parents=[common], help='Delete cached spectra')
    return parser


def _run(args) -> Tuple[Result, RunConfig]:
    config = load_run_config(args.config)
    if args.jobs < 1:
        raise ConfigError('jobs', f"must be >= 1, got {args.jobs}")
    cache = SpectrumCache(resolve_cache_dir(args.cache_dir, config))
    result = COMMANDS[args.command](args, config, cache)
    logger.info(f"Cache stats: {cache.get_stats()}")
    return result, config


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), format=LOG_FORMAT, stream=sys.stderr)

    try:
        result, config = _run(args)
    except ConfigError as e:
        emit_error(e)
        return EXIT_CONFIG_INVALID
    except LabError as e:
        emit_error(e)
        return EXIT_SOLVER_FAILURE
    except ValueError as e:
        emit_error(ConfigError('arguments', str(e)))
        return EXIT_CONFIG_INVALID

    fmt = args.format or config.output.format
    path = args.output or config.output.path
    meta = _meta(config, args.command)
    if fmt == 'csv':
        text = to_csv(meta, result.comments, result.columns, result.rows)
    else:
        text = to_json({'meta': meta, **result.payload})
    _write(text, path)
    return result.exit_code
