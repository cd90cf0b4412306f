"""Discrete belief distributions over a shared price grid."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr, softmax

logger = logging.getLogger(__name__)

MASS_TOLERANCE = 1e-9
KL_TOLERANCE = 1e-12
KERNELS = ('delta', 'gaussian')


class BeliefError(ValueError):
    """Raised when a grid, histogram or distribution is invalid"""


def _frozen(values, dtype=float):
    array = np.array(values, dtype=dtype)
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class BinGrid:
    lower: float
    upper: float
    bin_count: int

    def __post_init__(self):
        if self.bin_count < 2:
            raise BeliefError("degenerate grid: bin_count must be at least 2")
        if not self.lower < self.upper:
            raise BeliefError(f"degenerate grid: lower {self.lower} must be below upper {self.upper}")

    @property
    def width(self):
        return (self.upper - self.lower) / self.bin_count

    @property
    def edges(self):
        edges = self.lower + np.arange(self.bin_count + 1) * self.width
        edges[-1] = self.upper
        return edges

    @property
    def centers(self):
        return self.lower + (np.arange(self.bin_count) + 0.5) * self.width

    def bin_index(self, value):
        """Index of the bin containing value, clamped to the nearest bin"""
        index = np.floor((np.asarray(value, dtype=float) - self.lower) / self.width).astype(int)
        index = np.clip(index, 0, self.bin_count - 1)
        return int(index) if index.ndim == 0 else index

    def contains(self, value):
        return self.lower <= value <= self.upper


@dataclass(frozen=True, eq=False)
class BeliefDistribution:
    grid: BinGrid
    mass: np.ndarray

    def __post_init__(self):
        mass = _frozen(self.mass)
        if mass.shape != (self.grid.bin_count,):
            raise BeliefError(f"mass has {mass.size} entries, grid has {self.grid.bin_count} bins")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise BeliefError("mass must be finite and non-negative")
        if abs(mass.sum() - 1.0) > MASS_TOLERANCE:
            raise BeliefError(f"mass sums to {mass.sum()!r}, not 1")
        object.__setattr__(self, 'mass', mass)

    @classmethod
    def uniform(cls, grid):
        return cls(grid, np.full(grid.bin_count, 1.0 / grid.bin_count))

    @classmethod
    def from_weights(cls, grid, weights):
        """Normalize non-negative weights into a distribution"""
        weights = np.asarray(weights, dtype=float)
        total = weights.sum()
        if not total > 0:
            raise BeliefError("weights have no positive mass")
        return cls(grid, weights / total)

    def is_strictly_positive(self):
        return bool(np.all(self.mass > 0))


@dataclass(frozen=True, eq=False)
class SocialHistogram:
    """Peer-prediction counts per bin, as shown to a participant"""
    grid: BinGrid
    counts: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.counts)
        if raw.shape != (self.grid.bin_count,):
            raise BeliefError(f"histogram has {raw.size} counts, grid has {self.grid.bin_count} bins")
        if np.any(raw < 0) or np.any(raw != np.round(raw)):
            raise BeliefError("histogram counts must be non-negative integers")
        counts = _frozen(raw, dtype=np.int64)
        if counts.sum() <= 0:
            raise BeliefError("empty histogram: total count must be positive")
        object.__setattr__(self, 'counts', counts)

    def __eq__(self, other):
        if not isinstance(other, SocialHistogram):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.counts, other.counts)

    __hash__ = None

    @classmethod
    def from_values(cls, values, grid):
        indices = grid.bin_index(np.atleast_1d(values))
        return cls(grid, np.bincount(indices, minlength=grid.bin_count))

    @property
    def total(self):
        return int(self.counts.sum())

    def mean(self):
        """Count-weighted mean of the bin centers"""
        return float(np.dot(self.counts, self.grid.centers) / self.total)

    def std(self):
        deviations = self.grid.centers - self.mean()
        return float(np.sqrt(np.dot(self.counts, deviations ** 2) / self.total))

    def rebin(self, grid):
        """Move every count to the target bin holding its source bin center"""
        if grid == self.grid:
            return self
        targets = grid.bin_index(self.grid.centers)
        return SocialHistogram(grid, np.bincount(targets, weights=self.counts, minlength=grid.bin_count).astype(np.int64))


def make_grid(points, bin_count, padding_fraction=0.05):
    """Build a uniform grid spanning all points plus padding"""
    points = np.asarray(points, dtype=float).ravel()
    if points.size == 0:
        raise BeliefError("no observations")
    if bin_count < 2:
        raise BeliefError("degenerate grid: bin_count must be at least 2")
    if padding_fraction < 0:
        raise BeliefError("padding_fraction must be non-negative")

    low, high = float(points.min()), float(points.max())
    spread = high - low
    if spread == 0:
        # Single distinct value: fixed span of one unit around it
        return BinGrid(low - 0.5, high + 0.5, int(bin_count))
    return BinGrid(low - padding_fraction * spread, high + padding_fraction * spread, int(bin_count))


def resolve_bandwidth(grid, bandwidth='auto'):
    if bandwidth is None or bandwidth == 'auto':
        return grid.width
    bandwidth = float(bandwidth)
    if not bandwidth > 0:
        raise BeliefError(f"bandwidth must be positive, got {bandwidth}")
    return bandwidth


def point_to_distribution(point, grid, kernel='gaussian', bandwidth='auto'):
    """Spread a point estimate over the grid with a delta or Gaussian kernel"""
    if kernel not in KERNELS:
        raise BeliefError(f"unknown kernel {kernel!r}, expected one of {KERNELS}")
    bandwidth = resolve_bandwidth(grid, bandwidth)
    point = float(point)
    if point < grid.lower - bandwidth or point > grid.upper + bandwidth:
        raise BeliefError(f"point off grid: {point} outside [{grid.lower}, {grid.upper}]")

    if kernel == 'delta':
        mass = np.zeros(grid.bin_count)
        mass[grid.bin_index(point)] = 1.0
        return BeliefDistribution(grid, mass)

    # Normalized in log space so narrow kernels never underflow to all zeros
    log_weights = -((grid.centers - point) ** 2) / (2.0 * bandwidth ** 2)
    return BeliefDistribution(grid, softmax(log_weights))


def histogram_to_distribution(hist, smoothing=1.0):
    """Laplace-smoothed empirical distribution of a histogram"""
    if smoothing < 0:
        raise BeliefError("smoothing must be non-negative")
    counts = hist.counts.astype(float)
    return BeliefDistribution(hist.grid, (counts + smoothing) / (hist.total + smoothing * hist.grid.bin_count))


def smooth_distribution(dist, epsilon=1e-6):
    """Mix a little uniform mass into a distribution so every bin is positive"""
    if epsilon < 0:
        raise BeliefError("epsilon must be non-negative")
    return BeliefDistribution(dist.grid, (dist.mass + epsilon) / (1.0 + epsilon * dist.grid.bin_count))


def dist_mean(dist):
    return float(np.dot(dist.mass, dist.grid.centers))


def dist_mode(dist):
    """Center of the heaviest bin; ties go to the lowest index"""
    return float(dist.grid.centers[int(np.argmax(dist.mass))])


def _check_same_grid(*dists):
    grid = dists[0].grid
    for other in dists[1:]:
        if other.grid != grid:
            raise BeliefError(f"mismatched grids: {grid} vs {other.grid}")
    return grid


def kl_divergence(p, q):
    """Kullback-Leibler divergence KL(p || q) in nats"""
    _check_same_grid(p, q)
    if np.any((p.mass > 0) & (q.mass == 0)):
        raise BeliefError("unsmoothed support mismatch: q has zero mass where p is positive")
    # Equal within tolerance reads as equal
    if np.max(np.abs(p.mass - q.mass)) < KL_TOLERANCE:
        return 0.0
    return max(float(rel_entr(p.mass, q.mass).sum()), 0.0)


def kl_matrix(dists):
    """Pairwise KL divergences; entry (i, j) is KL(dists[i] || dists[j])"""
    dists = list(dists)
    if dists:
        _check_same_grid(*dists)
    size = len(dists)
    matrix = np.zeros((size, size))
    for i in range(size):
        for j in range(size):
            if i != j:
                matrix[i, j] = kl_divergence(dists[i], dists[j])
    return matrix
