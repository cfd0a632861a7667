"""
Bulk Spectrum Module - Eigenvalues E_n(L) of the pair Hamiltonian on Omega_L
Fast separable model (center-of-mass / relative coordinates) and an independent
five-point finite-difference oracle on the antisymmetric half-domain.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse
from scipy.sparse.linalg import ArpackNoConvergence, eigsh
from scipy.special import erfcx

from .config import (
    FD_DENSE_MAX_NODES,
    FD_EIGSH_MAXITER,
    FD_EIGSH_TOL,
    FD_MIN_STEPS_PER_D,
    OCCUPATION_FLOOR,
)
from .errors import SpectrumError

logger = logging.getLogger(__name__)

OUTER_BCS = ('dirichlet', 'neumann')
SOURCES = ('separable', 'fd2d')


@dataclass(frozen=True)
class WireParams:
    """
    Geometry of the wire and the pair.

    Args:
        d: pair extent (hard-wall width of the binding potential)
        L: wire length
        outer_bc: 'dirichlet' or 'neumann' on the wire-end edges
    """
    d: float
    L: float
    outer_bc: str = 'dirichlet'

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError(f"d must be positive, got {self.d}")
        if not self.d < self.L:
            raise ValueError(f"d must be smaller than L, got d={self.d}, L={self.L}")
        if self.outer_bc not in OUTER_BCS:
            raise ValueError(f"outer_bc must be one of {OUTER_BCS}, got {self.outer_bc}")

    def with_length(self, L: float) -> 'WireParams':
        return WireParams(d=self.d, L=L, outer_bc=self.outer_bc)

    def to_dict(self) -> dict:
        return {'d': self.d, 'L': self.L, 'outer_bc': self.outer_bc}


@dataclass
class Spectrum:
    """Ascending bulk eigenvalues with multiplicity plus provenance."""
    eigenvalues: np.ndarray
    source: str
    cutoff_energy: float
    mesh_h: Optional[float] = None
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        if self.source not in SOURCES:
            raise ValueError(f"Unknown spectrum source: {self.source}")

    @property
    def ground(self) -> float:
        return float(self.eigenvalues[0])

    def __len__(self):
        return int(self.eigenvalues.size)

    def to_dict(self) -> dict:
        return {
            'eigenvalues': [float(x) for x in self.eigenvalues],
            'source': self.source,
            'cutoff': self.cutoff_energy,
            'h': self.mesh_h,
            'metadata': self.metadata,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'Spectrum':
        return cls(
            eigenvalues=np.asarray(doc['eigenvalues'], dtype=float),
            source=doc['source'],
            cutoff_energy=float(doc['cutoff']),
            mesh_h=doc.get('h'),
            metadata=dict(doc.get('metadata', {})),
        )


def ground_energy_limit(d: float) -> float:
    """E_0 = 2 pi^2 / d^2, the infinite-wire ground energy."""
    return 2.0 * math.pi ** 2 / d ** 2


def _relative_level(k, d):
    return 2.0 * math.pi ** 2 * np.square(k) / d ** 2


def _com_level(m, L):
    return math.pi ** 2 * np.square(m) / (2.0 * L ** 2)


def _lowest_com_index(outer_bc: str) -> int:
    return 0 if outer_bc == 'neumann' else 1


def separable_ground_energy(wire: WireParams) -> float:
    m0 = _lowest_com_index(wire.outer_bc)
    return float(_relative_level(1, wire.d) + _com_level(m0, wire.L))


def adaptive_cutoff(wire: WireParams, beta: float,
                    occupation_floor: float = OCCUPATION_FLOOR,
                    ground: Optional[float] = None) -> float:
    """
    Energy cutoff above which every bulk level has occupation below the floor
    for every admissible chemical potential (mu < E_0(L)).
    """
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    e_ground = separable_ground_energy(wire) if ground is None else ground
    return e_ground + math.log1p(1.0 / occupation_floor) / beta


def separable_spectrum(wire: WireParams, cutoff_energy: float) -> Spectrum:
    """
    All separable levels E_{k,m} = 2 pi^2 k^2/d^2 + pi^2 m^2/(2 L^2) below the cutoff.

    The relative coordinate is a Dirichlet interval of width d/sqrt(2)
    (antisymmetry plus hard wall); the center of mass runs over sqrt(2) L.
    Corner coupling at the wire ends is neglected, error O(d/L).

    Raises:
        SpectrumError: if no level lies below the cutoff
    """
    e_limit = ground_energy_limit(wire.d)
    m0 = _lowest_com_index(wire.outer_bc)
    if cutoff_energy <= separable_ground_energy(wire):
        raise SpectrumError(
            f"cutoff {cutoff_energy:.6g} is below the ground energy "
            f"(E_0 = {e_limit:.6g}); spectrum would be empty",
            diagnostics={'cutoff': cutoff_energy, 'E0': e_limit, **wire.to_dict()},
        )

    k_max = int(math.floor(wire.d * math.sqrt(cutoff_energy / (2.0 * math.pi ** 2)))) + 1
    blocks = []
    for k in range(1, k_max + 1):
        rel = _relative_level(k, wire.d)
        room = cutoff_energy - rel
        if room <= 0:
            break
        m_max = int(math.floor(math.sqrt(room * 2.0) * wire.L / math.pi)) + 1
        m = np.arange(m0, m_max + 1, dtype=float)
        levels = rel + _com_level(m, wire.L)
        blocks.append(levels[levels < cutoff_energy])

    eigs = np.sort(np.concatenate(blocks)) if blocks else np.empty(0)
    return Spectrum(
        eigenvalues=eigs,
        source='separable',
        cutoff_energy=float(cutoff_energy),
        mesh_h=None,
        metadata={**wire.to_dict(), 'method': 'separable', 'count': int(eigs.size)},
    )


def weyl_count(wire: WireParams, cutoff_energy: float) -> float:
    """Weyl-type estimate of the number of separable levels below the cutoff."""
    total = 0.0
    k = 1
    while True:
        room = cutoff_energy - _relative_level(k, wire.d)
        if room <= 0:
            break
        boundary = -0.5 if wire.outer_bc == 'dirichlet' else 0.5
        total += math.sqrt(2.0 * room) * wire.L / math.pi + boundary
        k += 1
    return total


def separable_tail_estimate(wire: WireParams, cutoff_energy: float,
                            mu: float, beta: float) -> float:
    """
    Upper bound on (1/L) * sum of Bose occupations of separable levels at or
    above the cutoff, via integral comparison and a geometric-series factor.
    """
    if cutoff_energy <= mu:
        return math.inf
    geometric = 1.0 / (-math.expm1(-beta * (cutoff_energy - mu)))
    c = math.pi ** 2 / (2.0 * wire.L ** 2)
    sqrt_bc = math.sqrt(beta * c)
    m0 = _lowest_com_index(wire.outer_bc)

    total = 0.0
    k = 1
    while True:
        rel = float(_relative_level(k, wire.d))
        room = cutoff_energy - rel
        m_star = max(m0, int(math.ceil(math.sqrt(2.0 * room) * wire.L / math.pi))) if room > 0 else m0
        e_star = rel + c * m_star ** 2
        z = m_star * sqrt_bc
        # Sum_{m >= m*} e^{-b c m^2} <= e^{-b c m*^2} (1 + erfcx(z) sqrt(pi)/(2 sqrt(b c)))
        term = math.exp(-beta * (e_star - mu)) * (1.0 + 0.5 * math.sqrt(math.pi) / sqrt_bc * erfcx(z))
        total += term
        if room <= 0 and term <= 1e-300 + 1e-17 * total:
            break
        k += 1
    return geometric * total / wire.L


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------

def _commensurate(length: float, h: float, name: str) -> int:
    steps = length / h
    n = int(round(steps))
    if n < 1 or abs(steps - n) > 1e-9 * max(1.0, steps):
        raise ValueError(f"{name}={length} is not an integer multiple of h={h}")
    return n


def _fd_operator(wire: WireParams, h: float) -> Tuple[scipy.sparse.csr_matrix, int]:
    """
    Symmetrized five-point Laplacian on {0 <= y < x <= L, x - y <= d}.

    Nodes are stored as (i, r) with x = i h, y = (i - r) h, 1 <= r <= K - 1.
    Dirichlet on r = 0 (diagonal) and r = K (hard wall). The wire-end edges
    y = 0 and x = L follow outer_bc; Neumann uses mirrored ghosts and the
    trapezoid-weight symmetrization W^{1/2} A W^{-1/2}.
    """
    N = _commensurate(wire.L, h, 'L')
    K = _commensurate(wire.d, h, 'd')
    neumann = wire.outer_bc == 'neumann'

    i_idx, r_idx = np.meshgrid(np.arange(N + 1), np.arange(K + 1), indexing='ij')
    j_idx = i_idx - r_idx
    j_min = 0 if neumann else 1
    i_max = N if neumann else N - 1
    active = (r_idx >= 1) & (r_idx <= K - 1) & (j_idx >= j_min) & (i_idx <= i_max)

    index = np.full(active.shape, -1, dtype=np.int64)
    n_nodes = int(active.sum())
    index[active] = np.arange(n_nodes)

    ai, ar = np.nonzero(active)
    aj = ai - ar
    p = index[ai, ar]
    weight = np.ones(n_nodes)
    if neumann:
        weight[aj == 0] *= 0.5
        weight[ai == N] *= 0.5

    inv_h2 = 1.0 / h ** 2
    rows = [p]
    cols = [p]
    vals = [np.full(n_nodes, 4.0 * inv_h2)]

    # (di, dj) -> neighbor (i + di, j + dj), i.e. r changes by di - dj
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni = ai + di
        nj = aj + dj
        if neumann:
            # Ghost beyond a Neumann edge mirrors to the opposite neighbor
            ghost_y = nj < 0
            ghost_x = ni > N
            nj = np.where(ghost_y, aj + 1, nj)
            ni = np.where(ghost_x, ai - 1, ni)
        nr = ni - nj
        inside = (ni >= 0) & (ni <= N) & (nr >= 0) & (nr <= K)
        q = np.full(n_nodes, -1, dtype=np.int64)
        q[inside] = index[ni[inside], nr[inside]]
        link = q >= 0
        rows.append(p[link])
        cols.append(q[link])
        vals.append(np.full(int(link.sum()), -inv_h2))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    vals = vals * np.sqrt(weight[rows] / weight[cols])
    matrix = scipy.sparse.coo_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes)).tocsr()
    return matrix, n_nodes


def fd2d_spectrum(wire: WireParams, h: float, n_lowest: int) -> Spectrum:
    """
    Lowest eigenvalues of the five-point discretization on the half-domain.

    Dense solve for small grids, shift-invert Lanczos (deterministic start
    vector) for large ones.

    Raises:
        ValueError: if h >= d/8, or d, L are not multiples of h
        SpectrumError: if the grid has fewer nodes than n_lowest, or the
            eigen-iteration does not converge
    """
    if h <= 0 or not h * FD_MIN_STEPS_PER_D < wire.d:
        raise ValueError(f"h must satisfy 0 < h < d/{FD_MIN_STEPS_PER_D}, got h={h}")
    if n_lowest < 1:
        raise ValueError(f"n_lowest must be >= 1, got {n_lowest}")

    matrix, n_nodes = _fd_operator(wire, h)
    if n_nodes < n_lowest:
        raise SpectrumError(
            f"mesh too coarse: {n_nodes} interior nodes for {n_lowest} eigenvalues",
            diagnostics={'nodes': n_nodes, 'n_lowest': n_lowest, 'h': h, **wire.to_dict()},
        )

    if n_nodes <= FD_DENSE_MAX_NODES or n_lowest >= n_nodes - 1:
        eigs = scipy.linalg.eigh(
            matrix.toarray(), eigvals_only=True, subset_by_index=[0, n_lowest - 1]
        )
        solver = 'dense'
    else:
        sigma = 0.5 * ground_energy_limit(wire.d)
        try:
            eigs = eigsh(
                matrix, k=n_lowest, sigma=sigma, which='LM',
                v0=np.ones(n_nodes), tol=FD_EIGSH_TOL, maxiter=FD_EIGSH_MAXITER,
                return_eigenvectors=False,
            )
        except ArpackNoConvergence as exc:
            raise SpectrumError(
                f"shift-invert iteration did not converge: {exc}",
                diagnostics={'nodes': n_nodes, 'n_lowest': n_lowest, 'h': h,
                             'converged': len(exc.eigenvalues), **wire.to_dict()},
            )
        solver = 'shift_invert'

    eigs = np.sort(np.asarray(eigs, dtype=float))
    logger.debug(f"fd2d L={wire.L} h={h}: {n_nodes} nodes, {solver}, ground={eigs[0]:.10f}")
    return Spectrum(
        eigenvalues=eigs,
        source='fd2d',
        cutoff_energy=float(eigs[-1]),
        mesh_h=h,
        metadata={**wire.to_dict(), 'method': 'fd2d', 'n_lowest': n_lowest,
                  'nodes': n_nodes, 'solver': solver},
    )


def richardson_extrapolate(values: Sequence[float], hs: Sequence[float], order: int = 2) -> float:
    """
    Extrapolate values(h) to h = 0 assuming an expansion in powers of h**order
    (Neville's scheme in t = h**order).
    """
    if len(values) != len(hs) or not values:
        raise ValueError("values and hs must be nonempty and of equal length")
    t = np.asarray(hs, dtype=float) ** order
    table = [float(v) for v in values]
    n = len(table)
    for level in range(1, n):
        table = [
            (t[i] * table[i + 1] - t[i + level] * table[i]) / (t[i] - t[i + level])
            for i in range(n - level)
        ]
    return table[0]


def fd2d_extrapolated_ground(wire: WireParams, hs: Sequence[float],
                             spectra: Optional[List[Spectrum]] = None) -> Tuple[float, List[float]]:
    """Richardson-extrapolated FD ground energy over the mesh sequence hs."""
    if spectra is None:
        spectra = [fd2d_spectrum(wire, h, 1) for h in hs]
    grounds = [s.ground for s in spectra]
    return richardson_extrapolate(grounds, hs), grounds
