"""
Graph Spectrum Module - Weighted path-graph Laplacian of the surface defects
Builds the tridiagonal Laplacian of the defect chain and computes its spectrum.

Sign convention: (Lf)(n) = sum_m gamma_nm (f(n) - f(m)), positive semidefinite,
with the constant vector as zero mode. Edge weight e_n sits on edge {n, n+1}.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Tuple

import numpy as np
from numpy.linalg import LinAlgError
from scipy.linalg import eigh_tridiagonal

from .config import TOL_EIG
from .errors import GraphSpectrumError

logger = logging.getLogger(__name__)

WEIGHT_KINDS = ('constant', 'explicit', 'reciprocal', 'random')


@dataclass(frozen=True)
class WeightSpec:
    """
    Edge-weight generator for the defect chain.

    kinds:
    - constant:   e_n = value
    - explicit:   e_n = values[n-1]
    - reciprocal: e_n = scale / (offset + n)**power
    - random:     e_n ~ Uniform(low, high], numpy default_rng(seed)
    """
    kind: str = 'constant'
    value: float = 1.0
    values: Tuple[float, ...] = ()
    scale: float = 1.0
    offset: float = 0.0
    power: float = 1.0
    low: float = 0.0
    high: float = 1.0
    seed: Optional[int] = None

    def __post_init__(self):
        if self.kind not in WEIGHT_KINDS:
            raise ValueError(f"Unknown weight kind: {self.kind}")
        if self.kind == 'random' and self.seed is None:
            raise ValueError("random weights need an explicit seed")

    def weights(self, count: int) -> np.ndarray:
        """Edge weights (e_1, ..., e_{count-1}) for a chain of `count` defects."""
        n_edges = max(count - 1, 0)
        if self.kind == 'constant':
            return np.full(n_edges, float(self.value))
        if self.kind == 'explicit':
            if len(self.values) != n_edges:
                raise ValueError(
                    f"explicit weights need {n_edges} values, got {len(self.values)}"
                )
            return np.asarray(self.values, dtype=float)
        if self.kind == 'reciprocal':
            n = np.arange(1, n_edges + 1, dtype=float)
            return self.scale / (self.offset + n) ** self.power
        rng = np.random.default_rng(self.seed)
        # Uniform on (low, high]
        return self.high - (self.high - self.low) * rng.random(n_edges)

    def to_dict(self) -> dict:
        if self.kind == 'constant':
            return {'kind': 'constant', 'value': self.value}
        if self.kind == 'explicit':
            return {'kind': 'explicit', 'values': list(self.values)}
        if self.kind == 'reciprocal':
            return {'kind': 'reciprocal', 'scale': self.scale,
                    'offset': self.offset, 'power': self.power}
        return {'kind': 'random', 'low': self.low, 'high': self.high, 'seed': self.seed}


@dataclass(frozen=True)
class DefectLattice:
    """
    Surface-defect chain at a fixed wire length.

    Args:
        count: number of defects n(L), >= 1
        weights: edge weights e_1..e_{count-1}, strictly positive
        delta: target for lim L/n(L), >= 0
        weight_spec: generator the weights came from
    """
    count: int
    weights: np.ndarray
    delta: float = 1.0
    weight_spec: WeightSpec = field(default_factory=WeightSpec)

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, 'weights', weights)
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if weights.shape != (self.count - 1,):
            raise ValueError(
                f"expected {self.count - 1} edge weights, got {weights.shape[0]}"
            )
        if not np.all(np.isfinite(weights)) or np.any(weights <= 0.0):
            raise ValueError("edge weights must be finite and strictly positive")
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")


class TridiagonalMatrix(NamedTuple):
    diagonal: np.ndarray
    off_diagonal: np.ndarray

    def dense(self) -> np.ndarray:
        return (np.diag(self.diagonal)
                + np.diag(self.off_diagonal, 1)
                + np.diag(self.off_diagonal, -1))

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diagonal * v
        out[:-1] += self.off_diagonal * v[1:]
        out[1:] += self.off_diagonal * v[:-1]
        return out

    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.diagonal, dtype=float).tobytes())
        digest.update(np.ascontiguousarray(self.off_diagonal, dtype=float).tobytes())
        return digest.hexdigest()[:16]


@dataclass(frozen=True)
class GraphSpectrum:
    eigenvalues: np.ndarray
    count: int
    fingerprint: str
    driver: str
    source: str = 'graph'

    def to_dict(self) -> dict:
        return {
            'eigenvalues': [float(x) for x in self.eigenvalues],
            'count': self.count,
            'fingerprint': self.fingerprint,
            'driver': self.driver,
            'source': self.source,
        }


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def defect_count(L: float, delta: float, growth_exponent: Optional[float] = None) -> int:
    """
    Number of surface defects n(L) up to wire length L.

    delta > 0 gives n(L) = max(1, round(L / delta)). delta = 0 needs
    super-linear growth: round(L * log(1 + L)) by default, or
    round(L ** growth_exponent) with growth_exponent > 1.
    """
    if L <= 0:
        raise ValueError(f"L must be positive, got {L}")
    if delta > 0:
        return max(1, _round_half_up(L / delta))
    if delta < 0:
        raise ValueError(f"delta must be >= 0, got {delta}")
    if growth_exponent is not None:
        if growth_exponent <= 1.0:
            raise ValueError("growth_exponent must exceed 1 for delta = 0")
        return max(1, _round_half_up(L ** growth_exponent))
    return max(1, _round_half_up(L * math.log1p(L)))


def make_lattice(count: int, weight_spec: WeightSpec, delta: float = 1.0) -> DefectLattice:
    return DefectLattice(
        count=count,
        weights=weight_spec.weights(count),
        delta=delta,
        weight_spec=weight_spec,
    )


@dataclass(frozen=True)
class LatticeSpec:
    """
    Defect chain as a function of the wire length.

    count fixes n(L) regardless of L; absent removes the surface entirely
    (bulk-only runs).
    """
    delta: float = 1.0
    weight_spec: WeightSpec = field(default_factory=WeightSpec)
    growth_exponent: Optional[float] = None
    count: Optional[int] = None
    absent: bool = False

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if self.count is not None and self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")

    def count_at(self, L: float) -> int:
        if self.count is not None:
            return self.count
        return defect_count(L, self.delta, self.growth_exponent)

    def lattice_at(self, L: float) -> Optional[DefectLattice]:
        if self.absent:
            return None
        return make_lattice(self.count_at(L), self.weight_spec, self.delta)

    def to_dict(self) -> dict:
        doc = {'delta': self.delta, 'weights': self.weight_spec.to_dict(), 'absent': self.absent}
        if self.growth_exponent is not None:
            doc['growth_exponent'] = self.growth_exponent
        if self.count is not None:
            doc['count'] = self.count
        return doc


def build_path_laplacian(lattice: DefectLattice) -> TridiagonalMatrix:
    """
    Weighted path-graph Laplacian as diagonal + off-diagonal sequences.

    diagonal[n] = e_{n-1} + e_n (missing end terms are 0), off_diagonal[n] = -e_n.

    Raises:
        ValueError: if any weight is nonpositive
    """
    e = np.asarray(lattice.weights, dtype=float)
    if np.any(e <= 0.0):
        raise ValueError("edge weights must be strictly positive")

    diagonal = np.zeros(lattice.count)
    diagonal[:-1] += e
    diagonal[1:] += e
    return TridiagonalMatrix(diagonal=diagonal, off_diagonal=-e)


def eigenvalues_tridiagonal(matrix: TridiagonalMatrix) -> np.ndarray:
    """
    All eigenvalues of a symmetric tridiagonal matrix, ascending.

    Uses the implicit-shift QL/QR driver first and falls back to Sturm
    sequence bisection.

    Raises:
        GraphSpectrumError: if neither driver converges
    """
    return _eigenvalues_with_driver(matrix)[0]


def _eigenvalues_with_driver(matrix: TridiagonalMatrix) -> Tuple[np.ndarray, str]:
    d = np.asarray(matrix.diagonal, dtype=float)
    e = np.asarray(matrix.off_diagonal, dtype=float)
    if d.size == 1:
        return d.copy(), 'trivial'

    failures = {}
    for driver in ('sterf', 'stebz'):
        try:
            eigs = eigh_tridiagonal(d, e, eigvals_only=True, lapack_driver=driver)
        except (LinAlgError, ValueError) as exc:
            failures[driver] = str(exc)
            logger.warning(f"Tridiagonal driver {driver} failed: {exc}")
            continue
        if driver != 'sterf':
            logger.debug(f"Used fallback driver {driver} for n={d.size}")
        return np.sort(eigs), driver

    raise GraphSpectrumError(
        f"Tridiagonal eigensolve did not converge for n={d.size}",
        diagnostics={'fingerprint': matrix.fingerprint(), 'failures': failures},
    )


def zero_mode_residual(matrix: TridiagonalMatrix) -> float:
    """Max-norm of the Laplacian applied to the constant vector."""
    ones = np.ones_like(matrix.diagonal)
    return float(np.max(np.abs(matrix.matvec(ones))))


def graph_spectrum(lattice: DefectLattice) -> GraphSpectrum:
    matrix = build_path_laplacian(lattice)
    eigs, driver = _eigenvalues_with_driver(matrix)

    lowest = float(eigs[0])
    if abs(lowest) > TOL_EIG * max(1.0, float(np.max(matrix.diagonal, initial=0.0))):
        logger.warning(f"Lowest graph eigenvalue {lowest:.3e} is not zero within tolerance")

    return GraphSpectrum(
        eigenvalues=eigs,
        count=lattice.count,
        fingerprint=matrix.fingerprint(),
        driver=driver,
    )


def unit_path_eigenvalues(count: int) -> np.ndarray:
    """Closed form 4 sin^2(pi k / (2 n)), k = 0..n-1, for unit weights."""
    k = np.arange(count, dtype=float)
    return 4.0 * np.sin(np.pi * k / (2.0 * count)) ** 2
