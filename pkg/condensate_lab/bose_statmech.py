"""
Bose Statmech Module - Grand-canonical occupations and the (mu_L, rho_s) solve
Couples the bulk levels E_n(L) and the shifted surface levels
lambda_j - alpha + lambda * rho_s through the density constraint at fixed L.

Internally every chemical potential is carried as mu = mu_max - gap with
gap > 0, and the surface fixed point as the surface gap
s = lambda * rho_s - alpha - mu > 0; roots are found on log(gap) and log(s)
so occupations near a pole keep full relative precision.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .bulk_spectrum import Spectrum, WireParams, separable_tail_estimate
from .config import (
    BRACKET_MAX_DOUBLINGS,
    DENSITY_RTOL,
    FIXED_POINT_ATOL,
    MU_GAP_XTOL,
    NU_DEFAULT,
    ROOT_MAX_ITER,
    SURFACE_GAP_XTOL,
    TAIL_RTOL,
)
from .errors import DomainError, SolverError
from .graph_spectrum import DefectLattice, graph_spectrum

logger = logging.getLogger(__name__)

# exp() of log-gaps stays finite inside this range
_LOG_LIMIT = 700.0


@dataclass(frozen=True)
class PhysicalParams:
    """
    Args:
        beta: inverse temperature, > 0
        alpha: surface tension, >= 0
        lam: pair-pair interaction strength lambda, >= 0
        rho: target pair density per unit length, > 0
        nu: margin parameter of the destruction condition, > 1
    """
    beta: float
    alpha: float = 0.0
    lam: float = 0.0
    rho: float = 1.0
    nu: float = NU_DEFAULT

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")
        if not self.nu > 1:
            raise ValueError(f"nu must exceed 1, got {self.nu}")

    def with_rho(self, rho: float) -> 'PhysicalParams':
        return PhysicalParams(beta=self.beta, alpha=self.alpha, lam=self.lam, rho=rho, nu=self.nu)

    def to_dict(self) -> dict:
        return {'beta': self.beta, 'alpha': self.alpha, 'lambda': self.lam,
                'rho': self.rho, 'nu': self.nu}


@dataclass
class GrandCanonicalSolution:
    """Self-consistent state at fixed L."""
    L: float
    n_defects: int
    mu: float
    mu_max: float
    gap: float
    rho_s: float
    surface_gap: float
    surface_occupations: np.ndarray
    bulk_occupations: np.ndarray
    rho0: float
    density_residual: float
    fixed_point_residual: float
    target_rho: float
    surface_density: float = 0.0
    bulk_density: float = 0.0
    bulk_excited_density: float = 0.0
    bulk_tail: float = float('nan')
    iterations: int = 0
    params: Optional[PhysicalParams] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def ground_occupation(self) -> float:
        return float(self.bulk_occupations[0])

    def to_dict(self, include_occupations: bool = True) -> dict:
        doc = {
            'L': self.L,
            'n_defects': self.n_defects,
            'mu': self.mu,
            'mu_max': self.mu_max,
            'gap': self.gap,
            'rho_s': self.rho_s,
            'surface_gap': self.surface_gap,
            'rho0': self.rho0,
            'ground_occupation': self.ground_occupation,
            'surface_density': self.surface_density,
            'bulk_density': self.bulk_density,
            'bulk_excited_density': self.bulk_excited_density,
            'density_residual': self.density_residual,
            'fixed_point_residual': self.fixed_point_residual,
            'bulk_tail': self.bulk_tail,
            'target_rho': self.target_rho,
            'iterations': self.iterations,
        }
        if include_occupations:
            doc['surface_occupations'] = [float(x) for x in self.surface_occupations]
            doc['bulk_occupations'] = [float(x) for x in self.bulk_occupations]
        return doc


def occupation(E: float, mu: float, beta: float) -> float:
    """
    Bose occupation 1/(e^{beta (E - mu)} - 1) of a single level.

    Raises:
        DomainError: if E <= mu
    """
    if not E > mu:
        raise DomainError(
            f"occupation needs E > mu, got E={E}, mu={mu}",
            diagnostics={'E': E, 'mu': mu, 'beta': beta},
        )
    x = beta * (E - mu)
    if x > 700.0:
        return math.exp(-x)
    return 1.0 / math.expm1(x)


def occupations(excess: np.ndarray, beta: float) -> np.ndarray:
    """Vectorized occupations for level excesses E - mu > 0."""
    with np.errstate(over='ignore'):
        return 1.0 / np.expm1(beta * np.asarray(excess, dtype=float))


def _as_levels(bulk: Union[Spectrum, Sequence[float], np.ndarray]) -> np.ndarray:
    levels = bulk.eigenvalues if isinstance(bulk, Spectrum) else bulk
    levels = np.asarray(levels, dtype=float)
    if levels.size == 0:
        raise ValueError("bulk spectrum is empty")
    return levels


def _as_graph_eigs(lattice: Optional[DefectLattice], graph_eigs) -> np.ndarray:
    if graph_eigs is None:
        if lattice is None:
            return np.empty(0)
        graph_eigs = graph_spectrum(lattice).eigenvalues
    # The zero mode is exact; clip round-off below it
    return np.maximum(np.asarray(graph_eigs, dtype=float), 0.0)


def _log_bracket(func, t_start: float, increasing: bool, what: str) -> Tuple[float, float]:
    """
    Expand geometrically (in log space) until func changes sign around t.
    `increasing` states the monotonicity of func in t.
    """
    f0 = func(t_start)
    if f0 == 0.0:
        return t_start, t_start
    # Direction in t that moves func toward zero
    go_up = (f0 < 0) == increasing
    step = 1.0
    t_prev, t = t_start, t_start
    for _ in range(BRACKET_MAX_DOUBLINGS):
        if abs(t) >= _LOG_LIMIT:
            break
        t_prev = t
        t = t + step if go_up else t - step
        t = min(max(t, -_LOG_LIMIT), _LOG_LIMIT)
        ft = func(t)
        if (ft > 0) != (f0 > 0) or ft == 0.0:
            return (t_prev, t) if go_up else (t, t_prev)
        step *= 2.0
    raise SolverError(
        f"bracket expansion failed for the {what}",
        diagnostics={'t_start': t_start, 'last_t': t, 'doublings': BRACKET_MAX_DOUBLINGS},
    )


def _solve_surface_gap(eigs: np.ndarray, c: float, params: PhysicalParams) -> Tuple[float, float, float, int]:
    """
    Surface fixed point for lambda > 0, with c = alpha + mu.

    Solves (s + c)/lam = mean_j occ(eigs_j + s) for the surface gap s > max(0, -c).
    Returns (rho_s, s, residual, iterations).
    """
    lam, beta = params.lam, params.beta
    s_lo = max(0.0, -c)

    def split(u):
        s = s_lo + u
        # rho_s = (s + c)/lam; when c < 0, s_lo + c == 0 exactly
        rho_s = u / lam if c < 0 else (u + c) / lam
        return s, rho_s

    def g_of_u(u):
        s, rho_s = split(u)
        return rho_s - float(np.mean(occupations(eigs + s, beta)))

    def g(t):
        return g_of_u(math.exp(t))

    if c < 0:
        # The root satisfies u = lam * mean occ(eigs + s_lo + u) <= lam * m(s_lo)
        upper = lam * float(np.mean(occupations(eigs + s_lo, beta)))
        if upper <= 0.0 or math.log(upper) < -_LOG_LIMIT:
            return 0.0, s_lo, 0.0, 0
        t0 = math.log(upper)
    else:
        t0 = math.log(max(1.0 / beta, c, 1e-3))

    t_lo, t_hi = _log_bracket(g, t0, increasing=True, what='surface fixed point')
    if t_lo == t_hi:
        t_root, iterations = t_lo, 0
    else:
        t_root, info = brentq(g, t_lo, t_hi, xtol=SURFACE_GAP_XTOL, maxiter=ROOT_MAX_ITER,
                              full_output=True, disp=False)
        iterations = info.iterations
        if not info.converged:
            raise SolverError(
                "surface fixed point did not converge",
                diagnostics={'bracket': [t_lo, t_hi], 'iterations': iterations, 'c': c},
            )

    # Newton polish in u; g'(u) = 1/lam + beta * mean(occ (1 + occ)) > 0
    u = math.exp(t_root)
    best_u, best_g = u, abs(g_of_u(u))
    for _ in range(3):
        occ = occupations(eigs + s_lo + u, beta)
        slope = 1.0 / lam + beta * float(np.mean(occ * (1.0 + occ)))
        u_next = u - g_of_u(u) / slope
        if not u_next > 0:
            break
        u = u_next
        g_abs = abs(g_of_u(u))
        if g_abs < best_g:
            best_u, best_g = u, g_abs

    s, rho_s = split(best_u)
    return rho_s, s, best_g, iterations


def surface_fixed_point(graph_eigs: Sequence[float], mu: float, params: PhysicalParams) -> float:
    """
    Surface pair density rho_s at chemical potential mu.

    lambda > 0: unique rho_s > max(0, (mu + alpha)/lambda) with
        rho_s = (1/n) sum_j occ(lambda_j - alpha + lambda rho_s, mu).
    lambda = 0: the direct average, which needs mu < -alpha.

    Raises:
        DomainError: lambda = 0 and mu >= -alpha
        SolverError: bracket expansion or root iteration failure
    """
    eigs = _as_graph_eigs(None, graph_eigs)
    if eigs.size == 0:
        raise ValueError("graph_eigs is empty")
    if params.lam == 0.0:
        gap = -params.alpha - mu
        if not gap > 0:
            raise DomainError(
                f"lambda = 0 requires mu < -alpha, got mu={mu}, alpha={params.alpha}",
                diagnostics={'mu': mu, 'alpha': params.alpha},
            )
        return float(np.mean(occupations(eigs + gap, params.beta)))
    rho_s, _, _, _ = _solve_surface_gap(eigs, params.alpha + mu, params)
    return rho_s


class _System:
    """Levels and couplings at fixed L, evaluated at mu = mu_max - gap."""

    def __init__(self, bulk, lattice, params: PhysicalParams, L: float, graph_eigs=None):
        self.levels = _as_levels(bulk)
        self.bulk = bulk if isinstance(bulk, Spectrum) else None
        self.eigs = _as_graph_eigs(lattice, graph_eigs)
        self.params = params
        self.L = float(L)
        self.n = int(self.eigs.size)
        e0 = float(self.levels[0])
        if self.n > 0 and params.lam == 0.0:
            # mu_max = min(E_0(L), -alpha) = -alpha since E_0(L) > 0
            self.mu_max = min(e0, -params.alpha)
        else:
            self.mu_max = e0
        self.bulk_offsets = self.levels - self.mu_max

    def mu_of(self, gap: float) -> float:
        return self.mu_max - gap

    def surface(self, gap: float):
        """(rho_s, surface gap, surface occupations, residual, iterations)."""
        if self.n == 0:
            return 0.0, math.inf, np.empty(0), 0.0, 0
        p = self.params
        if p.lam == 0.0:
            if self.mu_max == -p.alpha:
                excess = self.eigs + gap
            else:
                excess = self.eigs + (-p.alpha - self.mu_of(gap))
            occ = occupations(excess, p.beta)
            return float(np.mean(occ)), float(excess[0]), occ, 0.0, 0
        c = (p.alpha + self.mu_max) - gap
        rho_s, s, residual, iterations = _solve_surface_gap(self.eigs, c, p)
        return rho_s, s, occupations(self.eigs + s, p.beta), residual, iterations

    def bulk_occupations(self, gap: float) -> np.ndarray:
        return occupations(self.bulk_offsets + gap, self.params.beta)

    def density(self, gap: float) -> float:
        _, _, surface_occ, _, _ = self.surface(gap)
        return (float(np.sum(surface_occ)) + float(np.sum(self.bulk_occupations(gap)))) / self.L

    def gap_of(self, mu: float) -> float:
        gap = self.mu_max - mu
        if not gap > 0:
            p = self.params
            if self.n > 0 and p.lam == 0.0:
                raise DomainError(
                    f"lambda = 0 requires mu < -alpha, got mu={mu}, alpha={p.alpha}",
                    diagnostics={'mu': mu, 'mu_max': self.mu_max},
                )
            raise DomainError(
                f"mu must stay below E_0(L)={self.mu_max}, got {mu}",
                diagnostics={'mu': mu, 'mu_max': self.mu_max},
            )
        return gap


def total_density(mu: float, bulk, lattice: Optional[DefectLattice], params: PhysicalParams,
                  L: float, graph_eigs=None) -> float:
    """
    Pair density (1/L)[sum_j occ(surface_j) + sum_n occ(E_n(L))] at mu, with
    rho_s from the surface fixed point. `lattice=None` drops the surface.
    """
    system = _System(bulk, lattice, params, L, graph_eigs)
    return system.density(system.gap_of(mu))


def _bulk_wire(bulk) -> Optional[WireParams]:
    # fd2d levels above the top retained one are bounded with the separable count
    if not isinstance(bulk, Spectrum):
        return None
    meta = bulk.metadata
    try:
        return WireParams(d=meta['d'], L=meta['L'], outer_bc=meta.get('outer_bc', 'dirichlet'))
    except (KeyError, ValueError):
        return None


def solve_mu(target_rho: float, bulk, lattice: Optional[DefectLattice], params: PhysicalParams,
             L: float, graph_eigs=None) -> GrandCanonicalSolution:
    """
    Chemical potential mu_L fixing the pair density at `target_rho`.

    Bracketed root finding on log(mu_max - mu) with geometric bracket
    expansion; the surface fixed point is solved inside every density
    evaluation, so the constraint mu < lambda rho_s - alpha holds by
    construction.

    Raises:
        SolverError: bracket failure, or density tolerance not met
            (diagnostics carry the last bracket)
    """
    if not target_rho > 0:
        raise ValueError(f"target_rho must be positive, got {target_rho}")
    system = _System(bulk, lattice, params, L, graph_eigs)

    def f(t):
        return system.density(math.exp(t)) - target_rho

    t0 = math.log(max(1.0 / params.beta, 1e-3))
    t_lo, t_hi = _log_bracket(f, t0, increasing=False, what=f'chemical potential at L={L}')
    if t_lo == t_hi:
        t_root, iterations = t_lo, 0
    else:
        t_root, info = brentq(f, t_lo, t_hi, xtol=MU_GAP_XTOL, maxiter=ROOT_MAX_ITER,
                              full_output=True, disp=False)
        iterations = info.iterations
        if not info.converged:
            raise SolverError(
                f"chemical potential did not converge at L={L}",
                diagnostics={'L': L, 'bracket_log_gap': [t_lo, t_hi],
                             'bracket_mu': [system.mu_of(math.exp(t_hi)), system.mu_of(math.exp(t_lo))],
                             'iterations': iterations},
            )

    gap = math.exp(t_root)
    rho_s, s, surface_occ, fp_residual, _ = system.surface(gap)
    bulk_occ = system.bulk_occupations(gap)
    bulk_sum = float(np.sum(bulk_occ))
    surface_sum = float(np.sum(surface_occ))
    density = (surface_sum + bulk_sum) / system.L
    density_residual = density - target_rho
    mu = system.mu_of(gap)

    if abs(density_residual) > DENSITY_RTOL * max(1.0, target_rho):
        raise SolverError(
            f"density tolerance not met at L={L}: residual {density_residual:.3e}",
            diagnostics={'L': L, 'bracket_log_gap': [t_lo, t_hi], 'mu': mu,
                         'density_residual': density_residual, 'iterations': iterations},
        )
    if fp_residual > FIXED_POINT_ATOL:
        logger.warning(f"Surface fixed-point residual {fp_residual:.3e} at L={L}")

    tail = float('nan')
    wire = _bulk_wire(bulk)
    if wire is not None:
        tail = separable_tail_estimate(wire, bulk.cutoff_energy, mu, params.beta)
        if tail > TAIL_RTOL * target_rho:
            logger.warning(f"Bulk tail estimate {tail:.3e} exceeds {TAIL_RTOL:g}*rho at L={L}")

    rho0 = float(bulk_occ[0]) / system.L
    solution = GrandCanonicalSolution(
        L=system.L,
        n_defects=system.n,
        mu=mu,
        mu_max=system.mu_max,
        gap=gap,
        rho_s=rho_s,
        surface_gap=s,
        surface_occupations=surface_occ,
        bulk_occupations=bulk_occ,
        rho0=rho0,
        density_residual=density_residual,
        fixed_point_residual=fp_residual,
        target_rho=target_rho,
        surface_density=surface_sum / system.L,
        bulk_density=bulk_sum / system.L,
        bulk_excited_density=(bulk_sum - float(bulk_occ[0])) / system.L,
        bulk_tail=tail,
        iterations=iterations,
        params=params,
    )
    logger.debug(f"L={L}: mu={mu:.12g} rho_s={rho_s:.6g} rho0={rho0:.3e} ({iterations} iterations)")
    return solution


def macroscopic_occupation_diagnostics(solution: GrandCanonicalSolution, L: Optional[float] = None) -> dict:
    """
    Occupation and occupation/L for the bulk ground state, the first excited
    bulk state and the lowest surface mode.
    """
    L = solution.L if L is None else float(L)

    def entry(occ):
        if occ is None:
            return {'occupation': None, 'ratio': None}
        return {'occupation': float(occ), 'ratio': float(occ) / L}

    bulk = solution.bulk_occupations
    surface = solution.surface_occupations
    return {
        'L': L,
        'bulk_ground': entry(bulk[0]),
        'bulk_first_excited': entry(bulk[1] if bulk.size > 1 else None),
        'surface_lowest': entry(surface[0] if surface.size > 0 else None),
    }


def brute_force_grid_solve(target_rho: float, bulk_levels: Sequence[float], graph_eigs: Sequence[float],
                           params: PhysicalParams, L: float, mu_range: Tuple[float, float],
                           rho_s_range: Tuple[float, float], n_mu: int = 801,
                           n_rho_s: int = 801) -> dict:
    """
    Dense (mu, rho_s) scan for toy systems; independent of the root finders.

    For each mu the grid rho_s with the smallest fixed-point mismatch is kept,
    then the mu with the smallest density mismatch wins.
    """
    levels = np.asarray(bulk_levels, dtype=float)
    eigs = np.asarray(graph_eigs, dtype=float)
    n = eigs.size
    mus = np.linspace(mu_range[0], mu_range[1], n_mu)
    rho_ss = np.linspace(rho_s_range[0], rho_s_range[1], n_rho_s)
    beta = params.beta

    best = None
    for mu in mus:
        if mu >= levels[0]:
            continue
        excess = eigs[None, :] - params.alpha + params.lam * rho_ss[:, None] - mu
        valid = np.all(excess > 0, axis=1)
        if not np.any(valid):
            continue
        mean_occ = np.full(n_rho_s, np.nan)
        mean_occ[valid] = np.mean(occupations(excess[valid], beta), axis=1)
        mismatch = np.where(valid, np.abs(rho_ss - mean_occ), np.inf)
        k = int(np.argmin(mismatch))
        rho_s = float(rho_ss[k])
        density = (n * float(mean_occ[k]) + float(np.sum(occupations(levels - mu, beta)))) / L
        err = abs(density - target_rho)
        if best is None or err < best['density_error']:
            best = {'mu': float(mu), 'rho_s': rho_s, 'density_error': err,
                    'fixed_point_error': float(mismatch[k])}
    if best is None:
        raise SolverError("grid scan found no admissible point",
                          diagnostics={'mu_range': list(mu_range), 'rho_s_range': list(rho_s_range)})
    best['mu_step'] = float(mus[1] - mus[0]) if n_mu > 1 else 0.0
    best['rho_s_step'] = float(rho_ss[1] - rho_ss[0]) if n_rho_s > 1 else 0.0
    return best
