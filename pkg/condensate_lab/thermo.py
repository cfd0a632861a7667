"""
Thermo Module - Thermodynamic-limit sweeps and verification suites
Finite-size sweeps over the wire length, the closed-form excited density
rho_exc, the destruction / reconstruction verdicts and the critical-density
finder.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np
from scipy import integrate, stats

from .bose_statmech import GrandCanonicalSolution, PhysicalParams, solve_mu
from .bulk_spectrum import (
    Spectrum,
    WireParams,
    adaptive_cutoff,
    fd2d_spectrum,
    ground_energy_limit,
    separable_ground_energy,
    separable_spectrum,
)
from .config import (
    BALANCE_ATOL,
    CONDENSATION_THRESHOLD,
    CRITICAL_MAX_STEPS,
    CRITICAL_REL_WIDTH,
    DEFAULT_JOBS,
    EXTRAPOLATION_MIN_POINTS,
    OCCUPATION_FLOOR,
    RHO_EXC_QUAD_EPSREL,
    RHO_EXC_TERM_RTOL,
    STABILITY_RTOL,
)
from .errors import BracketError, DomainError, LabError, SolverError, SpectrumError
from .graph_spectrum import LatticeSpec
from .spectrum_cache import SpectrumCache

logger = logging.getLogger(__name__)

RHO_EXC_METHODS = ('series', 'quadrature')

# ln(1e16): the Gaussian factor e^{-beta x^2} drops below 1e-16 past sqrt(this/beta)
_QUAD_TAIL_EXPONENT = math.log(1e16)


# ---------------------------------------------------------------------------
# Excited density
# ---------------------------------------------------------------------------

def _rho_exc_series_term(beta: float, excess: float) -> float:
    # (1/sqrt(2 pi beta)) Li_{1/2}(e^{-beta excess})
    with mpmath.workdps(25):
        z = mpmath.exp(-beta * mpmath.mpf(excess))
        return float(mpmath.polylog(0.5, z)) / math.sqrt(2.0 * math.pi * beta)


def _bose(y: float) -> float:
    return math.exp(-y) if y > 700.0 else 1.0 / math.expm1(y)


def _rho_exc_quad_term(beta: float, excess: float) -> float:
    a = beta * excess
    x_max = math.sqrt(_QUAD_TAIL_EXPONENT / beta)
    if a < 1.0:
        # Split off 1/y, y = a + beta x^2, whose integral over [0, inf) is pi/(2 sqrt(a beta))
        def smooth(x):
            y = a + beta * x * x
            return _bose(y) - 1.0 / y
        rest, _ = integrate.quad(smooth, 0.0, np.inf, epsabs=0.0,
                                 epsrel=RHO_EXC_QUAD_EPSREL, limit=400)
        value = 0.5 * math.pi / math.sqrt(a * beta) + rest
    else:
        def integrand(x):
            return _bose(a + beta * x * x)
        value, _ = integrate.quad(integrand, 0.0, x_max, epsabs=0.0,
                                  epsrel=RHO_EXC_QUAD_EPSREL, limit=400)
    return math.sqrt(2.0) / math.pi * value


def rho_exc(beta: float, mu: float, d: float, method: str = 'series') -> float:
    """
    Thermodynamic-limit density of pairs in excited bulk states,

        (sqrt(2)/pi) sum_{n>=1} int_0^inf dx / (e^{beta 2 pi^2 n^2/d^2} e^{beta (x^2 - mu)} - 1).

    series: each term is (1/sqrt(2 pi beta)) Li_{1/2}(e^{beta (mu - 2 pi^2 n^2/d^2)}).
    quadrature: adaptive integration, Gaussian tail cut where the integrand
    has dropped by 1e-16.

    The n = 1 integral diverges at mu = E_0, so rho_exc(E_0) = inf.

    Raises:
        DomainError: mu > E_0 = 2 pi^2/d^2
    """
    if method not in RHO_EXC_METHODS:
        raise ValueError(f"Unknown rho_exc method: {method}")
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    e0 = ground_energy_limit(d)
    if mu > e0:
        raise DomainError(f"rho_exc needs mu <= E_0={e0}, got {mu}",
                          diagnostics={'mu': mu, 'E0': e0, 'd': d})
    if mu == e0:
        return math.inf
    if mu == -math.inf:
        return 0.0

    term_fn = _rho_exc_series_term if method == 'series' else _rho_exc_quad_term
    total = 0.0
    n = 1
    while True:
        excess = 2.0 * math.pi ** 2 * n * n / d ** 2 - mu
        if n == 1:
            # Keep the smallest excess exact near the threshold
            excess = e0 - mu
        term = term_fn(beta, excess)
        total += term
        if term <= RHO_EXC_TERM_RTOL * total or term == 0.0:
            break
        n += 1
    return total


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BulkSpec:
    """
    How bulk spectra are produced at each L.

    Separable spectra use `cutoff` when given, otherwise the adaptive cutoff
    for `occupation_floor`; fd2d spectra need the mesh size `h` and start from
    `n_lowest` levels, doubled until the top level reaches the same cutoff.
    """
    method: str = 'separable'
    occupation_floor: float = OCCUPATION_FLOOR
    cutoff: Optional[float] = None
    h: Optional[float] = None
    n_lowest: int = 64

    def __post_init__(self):
        if self.method not in ('separable', 'fd2d'):
            raise ValueError(f"Unknown bulk method: {self.method}")
        if self.method == 'fd2d' and self.h is None:
            raise ValueError("fd2d bulk spectra need a mesh size h")
        if not 0 < self.occupation_floor < 1:
            raise ValueError(f"occupation_floor must lie in (0, 1), got {self.occupation_floor}")

    def spectrum_at(self, wire: WireParams, beta: float,
                    cache: Optional[SpectrumCache] = None) -> Spectrum:
        if self.method == 'separable':
            if self.cutoff is not None:
                cutoff = self.cutoff
            else:
                cutoff = adaptive_cutoff(wire, beta, self.occupation_floor)
            if cache is not None:
                return cache.fetch_or_compute(wire, 'separable', cutoff_energy=cutoff)
            return separable_spectrum(wire, cutoff)
        return self._fd2d_covering(wire, beta, cache)

    def _fd2d_covering(self, wire: WireParams, beta: float,
                       cache: Optional[SpectrumCache]) -> Spectrum:
        """
        Lowest fd2d levels, doubling the count until the top retained level
        reaches the cutoff (adaptive from the FD ground unless `cutoff` is set).

        Raises:
            SpectrumError: if the whole mesh lies below the cutoff
        """
        def compute(n):
            if cache is not None:
                return cache.fetch_or_compute(wire, 'fd2d', h=self.h, n_lowest=n)
            return fd2d_spectrum(wire, self.h, n)

        n = self.n_lowest
        spectrum = compute(n)
        if self.cutoff is not None:
            cutoff = self.cutoff
        else:
            ground = max(spectrum.ground, separable_ground_energy(wire))
            cutoff = adaptive_cutoff(wire, beta, self.occupation_floor, ground=ground)
        nodes = int(spectrum.metadata['nodes'])
        while spectrum.cutoff_energy < cutoff:
            if n >= nodes:
                raise SpectrumError(
                    f"fd2d mesh has no level above the cutoff {cutoff:.6g}",
                    diagnostics={'nodes': nodes, 'h': self.h, 'cutoff': cutoff,
                                 'top_level': spectrum.cutoff_energy, **wire.to_dict()},
                )
            n = min(2 * n, nodes)
            spectrum = compute(n)
        if n != self.n_lowest:
            logger.debug(f"fd2d L={wire.L}: kept {n} levels to reach cutoff {cutoff:.6g}")
        return spectrum

    def to_dict(self) -> dict:
        doc = {'method': self.method}
        if self.method == 'fd2d':
            doc.update({'h': self.h, 'n_lowest': self.n_lowest})
        elif self.cutoff is not None:
            doc['cutoff'] = self.cutoff
        else:
            doc['occupation_floor'] = self.occupation_floor
        return doc


@dataclass
class LinearFit:
    """y = intercept + slope / L on the upper half of a schedule."""
    intercept: float
    slope: float
    intercept_stderr: float
    points: int

    def to_dict(self) -> dict:
        return {'intercept': self.intercept, 'slope': self.slope,
                'intercept_stderr': self.intercept_stderr, 'points': self.points}


def fit_inverse_length(lengths: Sequence[float], values: Sequence[float]) -> LinearFit:
    """Fit a + b/L to the upper half (largest L) of the points."""
    lengths = np.asarray(lengths, dtype=float)
    values = np.asarray(values, dtype=float)
    n = lengths.size
    if n < 2:
        raise ValueError("need at least two points to extrapolate")
    start = n // 2 if n >= 4 else 0
    x = 1.0 / lengths[start:]
    y = values[start:]
    if np.ptp(y) == 0.0:
        return LinearFit(intercept=float(y[0]), slope=0.0, intercept_stderr=0.0, points=int(x.size))
    result = stats.linregress(x, y)
    stderr = float(result.intercept_stderr) if x.size > 2 else 0.0
    if not math.isfinite(stderr):
        stderr = 0.0
    return LinearFit(intercept=float(result.intercept), slope=float(result.slope),
                     intercept_stderr=stderr, points=int(x.size))


@dataclass
class ThermoSweep:
    L_schedule: List[float]
    delta: float
    per_L: List[GrandCanonicalSolution]
    params: PhysicalParams
    wire: WireParams
    extrapolated: Dict[str, float]
    fits: Dict[str, LinearFit]
    rho_exc_value: float
    balance_residual: float
    fit_error: float
    identity_residual: float
    warnings: List[str] = field(default_factory=list)

    @property
    def rho0_limit(self) -> float:
        return self.extrapolated['rho0_limit']

    @property
    def mu_limit(self) -> float:
        return self.extrapolated['mu_limit']

    def balance_ok(self, atol: float = BALANCE_ATOL) -> bool:
        return self.balance_residual <= max(atol, self.fit_error)

    def rows(self) -> List[dict]:
        """Per-L rows: (L, n_L, mu, rho_s, rho0, ground_occupation, balance_residual)."""
        return [
            {
                'L': s.L,
                'n_L': s.n_defects,
                'mu': s.mu,
                'rho_s': s.rho_s,
                'rho0': s.rho0,
                'ground_occupation': s.ground_occupation,
                'balance_residual': self.balance_residual,
            }
            for s in self.per_L
        ]

    def to_dict(self) -> dict:
        return {
            'L_schedule': list(self.L_schedule),
            'delta': self.delta,
            'params': self.params.to_dict(),
            'wire': {'d': self.wire.d, 'outer_bc': self.wire.outer_bc},
            'per_L': [s.to_dict(include_occupations=False) for s in self.per_L],
            'extrapolated': dict(self.extrapolated),
            'fits': {k: v.to_dict() for k, v in self.fits.items()},
            'rho_exc_value': self.rho_exc_value,
            'balance_residual': self.balance_residual,
            'fit_error': self.fit_error,
            'identity_residual': self.identity_residual,
            'warnings': list(self.warnings),
        }


def _validate_schedule(schedule: Sequence[float]) -> List[float]:
    lengths = [float(L) for L in schedule]
    if len(lengths) < EXTRAPOLATION_MIN_POINTS:
        raise ValueError(f"schedule needs at least {EXTRAPOLATION_MIN_POINTS} lengths, got {len(lengths)}")
    if any(b <= a for a, b in zip(lengths, lengths[1:])):
        raise ValueError("schedule must be strictly increasing")
    return lengths


def solve_at_length(L: float, lattice_spec: LatticeSpec, wire: WireParams, params: PhysicalParams,
                    bulk: BulkSpec, cache: Optional[SpectrumCache] = None) -> GrandCanonicalSolution:
    """One grand-canonical solve at wire length L."""
    wire_L = wire.with_length(L)
    spectrum = bulk.spectrum_at(wire_L, params.beta, cache)
    lattice = lattice_spec.lattice_at(L)
    try:
        return solve_mu(params.rho, spectrum, lattice, params, L)
    except LabError as exc:
        exc.diagnostics.setdefault('L', L)
        raise


def _monotone(values: Sequence[float]) -> bool:
    diffs = np.diff(np.asarray(values, dtype=float))
    return bool(np.all(diffs >= 0) or np.all(diffs <= 0))


def run_sweep(schedule: Sequence[float], lattice_spec: LatticeSpec, wire: WireParams,
              params: PhysicalParams, bulk: Optional[BulkSpec] = None,
              cache: Optional[SpectrumCache] = None, jobs: int = DEFAULT_JOBS) -> ThermoSweep:
    """
    Solve every L of the schedule and extrapolate to L -> infinity.

    mu, rho_s, rho_0 and the surface density (n/L) rho_s are fitted with
    a + b/L on the upper half of the schedule; the balance residual compares
    the extrapolated (n/L) rho_s + rho_0 with rho - rho_exc(beta, mu_limit).
    """
    lengths = _validate_schedule(schedule)
    bulk = bulk or BulkSpec()

    def task(L):
        return solve_at_length(L, lattice_spec, wire, params, bulk, cache)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_L = list(pool.map(task, lengths))
    else:
        per_L = [task(L) for L in lengths]
    logger.info(f"Solved {len(per_L)} lengths, L={lengths[0]:g}..{lengths[-1]:g}")

    series = {
        'mu': [s.mu for s in per_L],
        'rho_s': [s.rho_s for s in per_L],
        'rho0': [s.rho0 for s in per_L],
        'surface_density': [s.surface_density for s in per_L],
    }
    fits = {name: fit_inverse_length(lengths, values) for name, values in series.items()}

    warnings = []
    for name in ('mu', 'rho0'):
        if not _monotone(series[name]):
            message = f"{name} is not monotone along the schedule"
            warnings.append(message)
            logger.warning(message)

    e0 = ground_energy_limit(wire.d)
    mu_limit = fits['mu'].intercept
    extrapolated = {
        'mu_limit': mu_limit,
        'rho_s_limit': fits['rho_s'].intercept,
        'rho0_limit': fits['rho0'].intercept,
        'surface_density_limit': fits['surface_density'].intercept,
    }

    exc = rho_exc(params.beta, min(mu_limit, e0), wire.d)
    balance = abs(extrapolated['surface_density_limit'] + extrapolated['rho0_limit']
                  - (params.rho - exc))

    mu_err = fits['mu'].intercept_stderr
    if mu_err > 0 and mu_limit + mu_err < e0:
        exc_err = abs(rho_exc(params.beta, mu_limit + mu_err, wire.d) - exc)
    elif mu_err > 0:
        exc_err = math.inf
    else:
        exc_err = 0.0
    fit_error = fits['surface_density'].intercept_stderr + fits['rho0'].intercept_stderr + exc_err

    delta = lattice_spec.delta if not lattice_spec.absent else 0.0
    rho_tilde = 0.0 if delta == 0 else delta * (params.rho - exc)
    identity = abs(extrapolated['rho_s_limit'] - (rho_tilde - delta * extrapolated['rho0_limit']))

    logger.info(f"Extrapolated mu={mu_limit:.10g} rho0={extrapolated['rho0_limit']:.3e} "
                f"balance={balance:.3e}")
    return ThermoSweep(
        L_schedule=lengths,
        delta=delta,
        per_L=per_L,
        params=params,
        wire=wire,
        extrapolated=extrapolated,
        fits=fits,
        rho_exc_value=exc,
        balance_residual=balance,
        fit_error=fit_error,
        identity_residual=identity,
        warnings=warnings,
    )


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

def check_destruction_I(sweep: ThermoSweep, tol: float = CONDENSATION_THRESHOLD,
                        bulk_only: Optional[ThermoSweep] = None) -> dict:
    """
    Non-interacting verdict: occupation(E_n(L))/L decreases along the schedule
    and extrapolates to 0 for n = 0 and n = 1, and mu_L < -alpha at every L.

    `bulk_only` is an optional sweep with the surface removed; its ground
    ratio is expected to stay positive.
    """
    if sweep.params.lam != 0.0:
        raise ValueError("destruction I applies to lambda = 0 sweeps")
    lengths = sweep.L_schedule
    states = {}
    passed = True
    for level in (0, 1):
        ratios = [s.bulk_occupations[level] / s.L if s.bulk_occupations.size > level else 0.0
                  for s in sweep.per_L]
        decreasing = bool(np.all(np.diff(ratios) < 0))
        fit = fit_inverse_length(lengths, ratios)
        vanishes = abs(fit.intercept) <= tol
        states[f"n={level}"] = {
            'ratios': [float(r) for r in ratios],
            'decreasing': decreasing,
            'fit': fit.to_dict(),
            'extrapolated': fit.intercept,
            'vanishes': vanishes,
        }
        passed = passed and decreasing and vanishes

    alpha = sweep.params.alpha
    mu_below = all(s.mu < -alpha for s in sweep.per_L)
    passed = passed and mu_below
    verdict = {
        'suite': 'destruction_I',
        'passed': passed,
        'states': states,
        'mu_below_minus_alpha': mu_below,
        'tolerance': tol,
    }
    if bulk_only is not None:
        verdict['bulk_only_rho0_limit'] = bulk_only.rho0_limit
        verdict['bulk_only_condensed'] = bulk_only.rho0_limit > tol
    return verdict


def check_destruction_condition(params: PhysicalParams, delta: float, mu_limit: float, d: float) -> dict:
    """
    Destruction condition rho_tilde(mu, delta) < (E_0 + alpha)/(nu lambda) with
    rho_tilde = delta (rho - rho_exc(beta, mu)), and the cruder sufficient
    form delta * rho < (E_0 + alpha)/(nu lambda).
    """
    if not params.lam > 0:
        raise ValueError("the destruction condition needs lambda > 0")
    e0 = ground_energy_limit(d)
    bound = (e0 + params.alpha) / (params.nu * params.lam)
    if delta == 0:
        rho_tilde = 0.0
    else:
        rho_tilde = delta * (params.rho - rho_exc(params.beta, min(mu_limit, e0), d))
    return {
        'rho_tilde': rho_tilde,
        'bound': bound,
        'condition_met': rho_tilde < bound,
        'crude_condition_met': delta * params.rho < bound,
        'delta': delta,
        'mu_limit': mu_limit,
    }


def check_destruction_II(sweep: ThermoSweep, tol: float = CONDENSATION_THRESHOLD) -> dict:
    """
    Interacting verdict: when the destruction condition holds (always for
    delta = 0), the extrapolated rho_0 vanishes.
    """
    condition = check_destruction_condition(sweep.params, sweep.delta, sweep.mu_limit, sweep.wire.d)
    applicable = sweep.delta == 0 or condition['condition_met'] or condition['crude_condition_met']
    vanishes = abs(sweep.rho0_limit) <= tol
    return {
        'suite': 'destruction_II',
        'passed': vanishes if applicable else None,
        'applicable': applicable,
        'rho0_limit': sweep.rho0_limit,
        'condition': condition,
        'tolerance': tol,
    }


def check_balance(sweep: ThermoSweep, atol: float = BALANCE_ATOL) -> dict:
    return {
        'suite': 'limit_balance',
        'passed': sweep.balance_ok(atol),
        'balance_residual': sweep.balance_residual,
        'fit_error': sweep.fit_error,
        'identity_residual': sweep.identity_residual,
        'rho_exc': sweep.rho_exc_value,
    }


# ---------------------------------------------------------------------------
# Critical density
# ---------------------------------------------------------------------------

@dataclass
class CriticalDensityResult:
    rho_crit: float
    bracket: Tuple[float, float]
    history: List[dict]
    threshold: float
    scan: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {'rho_crit': self.rho_crit, 'bracket': list(self.bracket),
                'threshold': self.threshold, 'history': list(self.history),
                'scan': list(self.scan)}


def condensation_indicator(rho: float, schedule, lattice_spec, wire, params, bulk=None,
                           cache=None, jobs=DEFAULT_JOBS,
                           threshold: float = CONDENSATION_THRESHOLD) -> Tuple[bool, float]:
    sweep = run_sweep(schedule, lattice_spec, wire, params.with_rho(rho), bulk, cache, jobs)
    return sweep.rho0_limit > threshold, sweep.rho0_limit


def scan_indicator(rhos: Sequence[float], schedule, lattice_spec, wire, params, bulk=None,
                   cache=None, jobs=DEFAULT_JOBS, threshold: float = CONDENSATION_THRESHOLD) -> List[dict]:
    """Coarse rho scan of the condensation indicator."""
    rows = []
    for rho in rhos:
        condensed, rho0 = condensation_indicator(rho, schedule, lattice_spec, wire, params,
                                                 bulk, cache, jobs, threshold)
        rows.append({'rho': float(rho), 'rho0_limit': rho0, 'condensed': condensed})
    return rows


def find_critical_density(lattice_spec: LatticeSpec, wire: WireParams, params: PhysicalParams,
                          rho_bracket: Tuple[float, float], schedule: Sequence[float],
                          bulk: Optional[BulkSpec] = None, cache: Optional[SpectrumCache] = None,
                          jobs: int = DEFAULT_JOBS, threshold: float = CONDENSATION_THRESHOLD,
                          rel_width: float = CRITICAL_REL_WIDTH,
                          scan_points: int = 0) -> CriticalDensityResult:
    """
    Bisection on rho for the onset of an extrapolated bulk condensate
    (extrapolated rho_0 > threshold).

    With scan_points >= 3 a coarse linear rho scan runs first; the bracket is
    narrowed to the scan cell where the indicator switches on, and a
    non-monotone indicator is logged.

    Raises:
        BracketError: both bracket ends give the same indicator
        SolverError: propagated from the sweeps
    """
    if lattice_spec.absent or not lattice_spec.delta > 0:
        raise ValueError("critical density search needs delta > 0")
    if not params.lam > 0:
        raise ValueError("critical density search needs lambda > 0")
    lo, hi = float(rho_bracket[0]), float(rho_bracket[1])
    if not 0 < lo < hi:
        raise ValueError(f"rho bracket must satisfy 0 < low < high, got {rho_bracket}")

    history = []

    def record(step, label, rho, condensed, rho0):
        history.append({'step': step, 'probe': label, 'rho': rho, 'rho0_limit': rho0,
                        'condensed': condensed, 'low': lo, 'high': hi})
        logger.info(f"critical search step {step}: rho={rho:.8g} rho0={rho0:.4e} condensed={condensed}")

    def probe(rho):
        return condensation_indicator(rho, schedule, lattice_spec, wire, params,
                                      bulk, cache, jobs, threshold)

    scan = []
    if scan_points >= 3:
        scan = scan_indicator(np.linspace(lo, hi, scan_points), schedule, lattice_spec, wire,
                              params, bulk, cache, jobs, threshold)
        flags = [row['condensed'] for row in scan]
        if any(a and not b for a, b in zip(flags, flags[1:])):
            logger.warning("condensation indicator is not monotone in rho across the scan")
        lo_condensed, lo_rho0 = flags[0], scan[0]['rho0_limit']
        hi_condensed, hi_rho0 = flags[-1], scan[-1]['rho0_limit']
        if not lo_condensed and hi_condensed:
            k = flags.index(True)
            lo, hi = scan[k - 1]['rho'], scan[k]['rho']
        for row in scan:
            record(0, 'scan', row['rho'], row['condensed'], row['rho0_limit'])
    else:
        lo_condensed, lo_rho0 = probe(lo)
        record(0, 'low', lo, lo_condensed, lo_rho0)
        hi_condensed, hi_rho0 = probe(hi)
        record(0, 'high', hi, hi_condensed, hi_rho0)

    if lo_condensed or not hi_condensed:
        raise BracketError(
            "critical density bracket does not straddle the condensation onset",
            diagnostics={'low': float(rho_bracket[0]), 'high': float(rho_bracket[1]),
                         'rho0_low': lo_rho0, 'rho0_high': hi_rho0,
                         'condensed_low': lo_condensed, 'condensed_high': hi_condensed},
        )

    step = 0
    while hi - lo > rel_width * 0.5 * (lo + hi):
        step += 1
        if step > CRITICAL_MAX_STEPS:
            raise SolverError("critical density bisection exceeded its step budget",
                              diagnostics={'bracket': [lo, hi], 'steps': step})
        mid = 0.5 * (lo + hi)
        condensed, rho0 = probe(mid)
        if condensed:
            hi = mid
        else:
            lo = mid
        record(step, 'mid', mid, condensed, rho0)

    return CriticalDensityResult(rho_crit=0.5 * (lo + hi), bracket=(lo, hi),
                                 history=history, threshold=threshold, scan=scan)


def check_reconstruction(lattice_spec: LatticeSpec, wire: WireParams, params: PhysicalParams,
                         rho_bracket: Tuple[float, float], schedule: Sequence[float],
                         bulk: Optional[BulkSpec] = None, cache: Optional[SpectrumCache] = None,
                         jobs: int = DEFAULT_JOBS, threshold: float = CONDENSATION_THRESHOLD,
                         stability_rtol: float = STABILITY_RTOL, rel_width: float = CRITICAL_REL_WIDTH,
                         critical: Optional[CriticalDensityResult] = None) -> dict:
    """
    Reconstruction verdict: rho_crit > 0 exists, and at 2 rho_crit the
    extrapolated rho_0 is positive both on the schedule and on the schedule
    stretched to twice its maximal length. Stability of the extrapolated
    value between the two is reported alongside.
    """
    if critical is None:
        critical = find_critical_density(lattice_spec, wire, params, rho_bracket, schedule,
                                         bulk, cache, jobs, threshold, rel_width)
    rho_test = 2.0 * critical.rho_crit
    base = run_sweep(schedule, lattice_spec, wire, params.with_rho(rho_test), bulk, cache, jobs)
    stretched = [2.0 * L for L in schedule]
    longer = run_sweep(stretched, lattice_spec, wire, params.with_rho(rho_test), bulk, cache, jobs)

    r1, r2 = base.rho0_limit, longer.rho0_limit
    positive = r1 > threshold and r2 > threshold
    stable = positive and abs(r2 - r1) <= stability_rtol * abs(r1)
    if positive and not stable:
        logger.warning(f"extrapolated rho0 moved from {r1:.4g} to {r2:.4g} when the schedule was stretched")
    return {
        'suite': 'reconstruction',
        'passed': critical.rho_crit > 0 and positive,
        'rho_crit': critical.rho_crit,
        'bracket': list(critical.bracket),
        'rho_test': rho_test,
        'rho0_limit': r1,
        'rho0_limit_doubled': r2,
        'stable': stable,
        'history': critical.history,
    }


def check_bulk_only(schedule: Sequence[float], wire: WireParams, params: PhysicalParams,
                    bulk: Optional[BulkSpec] = None, cache: Optional[SpectrumCache] = None,
                    jobs: int = DEFAULT_JOBS, threshold: float = CONDENSATION_THRESHOLD) -> dict:
    """
    Sanity run with the surface removed: the bulk ground state alone picks
    up a positive extrapolated rho_0 once rho exceeds the desk-scale excited
    density.
    """
    sweep = run_sweep(schedule, LatticeSpec(absent=True), wire, params, bulk, cache, jobs)
    ratios = [s.ground_occupation / s.L for s in sweep.per_L]
    fit = fit_inverse_length(sweep.L_schedule, ratios)
    return {
        'suite': 'bulk_only',
        'passed': fit.intercept > threshold,
        'rho': params.rho,
        'ground_ratio_limit': fit.intercept,
        'ratios': [float(r) for r in ratios],
        'tolerance': threshold,
    }
