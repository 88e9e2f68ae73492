"""Low-discrepancy samples with non-equal quadrature weights.

Points come from a digit-scrambled Halton sequence pushed through the inverse
CDF of each marginal. Each point then receives the probability of its Voronoi
cell under the parameter density, estimated by classifying pseudo-random probe
draws to their nearest point.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import ndtri

from .errors import (
    DomainError,
    DuplicateSampleError,
    NonFiniteInputError,
    ShapeError,
    UnsupportedDimensionError,
)


def _first_primes(count):
    primes = []
    candidate = 2
    while len(primes) < count:
        if all(candidate % p for p in primes if p * p <= candidate):
            primes.append(candidate)
        candidate += 1
    return tuple(primes)


PRIMES = _first_primes(100)

# Seeds for the two named weight presets. They differ only in the scrambling
# seed offset; both use the same point/weight construction.
PRESET_SEED_OFFSETS = {"WZ": 0, "CL": 7919}


@dataclass(frozen=True)
class Normal:
    mean: float = 0.0
    sd: float = 1.0

    def __post_init__(self):
        if not (self.sd > 0 and math.isfinite(self.sd)):
            raise DomainError(f"marginal sd must be positive, got {self.sd}")


STANDARD_NORMAL = Normal(0.0, 1.0)


@dataclass(frozen=True)
class ParameterSpace:
    """Independent marginals of the random inputs alpha."""

    marginals: tuple[Normal, ...]

    def __post_init__(self):
        object.__setattr__(self, "marginals", tuple(self.marginals))
        if len(self.marginals) < 1:
            raise DomainError("parameter space needs at least one dimension")

    @classmethod
    def standard(cls, dim):
        return cls((STANDARD_NORMAL,) * dim)

    @classmethod
    def normal(cls, means, sds):
        return cls(tuple(Normal(float(m), float(s)) for m, s in zip(means, sds)))

    @property
    def dim(self):
        return len(self.marginals)

    @property
    def means(self):
        return np.array([m.mean for m in self.marginals])

    @property
    def sds(self):
        return np.array([m.sd for m in self.marginals])

    def logpdf(self, alpha):
        z = (np.atleast_2d(alpha) - self.means) / self.sds
        return -0.5 * np.sum(z * z, axis=1) - np.sum(np.log(self.sds)) - 0.5 * self.dim * math.log(2 * math.pi)

    def pdf(self, alpha):
        return np.exp(self.logpdf(alpha))

    def sample(self, n, seed):
        """Pseudo-random draws from the joint density."""
        rng = np.random.default_rng(seed)
        return self.means + self.sds * rng.standard_normal((n, self.dim))

    def describe(self):
        return [{"mean": m.mean, "sd": m.sd} for m in self.marginals]


@dataclass(frozen=True)
class WeightedSampleSet:
    samples: np.ndarray
    weights: np.ndarray
    generator_tag: str = ""
    seed: int = 0
    info: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        samples = np.array(self.samples, dtype=float, ndmin=2)
        weights = np.array(self.weights, dtype=float).ravel()
        if samples.shape[0] < 1:
            raise ShapeError("a sample set needs at least one sample")
        if weights.shape[0] != samples.shape[0]:
            raise ShapeError(f"{samples.shape[0]} samples but {weights.shape[0]} weights")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteInputError("sample rows must be finite")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DomainError("weights must be finite and non-negative")
        if abs(math.fsum(weights) - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {math.fsum(weights)!r}, not 1")
        samples.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "weights", weights)

    @property
    def n(self):
        return self.samples.shape[0]

    @property
    def dim(self):
        return self.samples.shape[1]


def _radical_inverse(index, base, perms):
    """Scrambled radical inverse of integer array ``index`` in ``base``.

    ``perms[d]`` permutes the digit at position d (d = 0 is the least
    significant digit, which lands right after the radix point).
    """
    out = np.zeros(index.shape, dtype=float)
    rest = index.copy()
    scale = 1.0 / base
    d = 0
    while np.any(rest > 0):
        digit = rest % base
        out += perms[d][digit] * scale
        rest //= base
        scale /= base
        d += 1
    return out


def _n_digits(n, base):
    digits = 0
    top = n
    while top > 0:
        top //= base
        digits += 1
    return max(digits, 1)


def halton_permutations(dim, seed, n_digits):
    """Digit permutations for each coordinate and digit position.

    Zero is kept fixed so that the radical inverse of a finite index stays a
    finite expansion (no 0.xxx(b-1)(b-1)... tails). Each coordinate draws
    from its own stream, so the first points do not change when ``n`` grows.
    """
    perms = []
    for j in range(dim):
        base = PRIMES[j]
        rng = np.random.default_rng([seed, j])
        per_dim = []
        for _ in range(n_digits[j]):
            p = np.empty(base, dtype=np.int64)
            p[0] = 0
            p[1:] = rng.permutation(base - 1) + 1
            per_dim.append(p)
        perms.append(per_dim)
    return perms


def generate_halton(n, dim, seed=0, scramble=True):
    """Scrambled Halton points in the open unit cube, shape ``(n, dim)``.

    Coordinate j uses the j-th prime as base. Indices start at 1 so that no
    point sits on the cube boundary. With ``scramble=False`` the plain
    sequence is returned (0.5, 0.25, 0.75, ... in base 2).
    """
    n = int(n)
    dim = int(dim)
    if n < 1 or dim < 1:
        raise DomainError("n and dim must be positive")
    if dim > len(PRIMES):
        raise UnsupportedDimensionError(
            f"Halton generator supports up to {len(PRIMES)} dimensions, got {dim}"
        )
    index = np.arange(1, n + 1, dtype=np.int64)
    n_digits = [_n_digits(n, PRIMES[j]) for j in range(dim)]
    if scramble:
        perms = halton_permutations(dim, seed, n_digits)
    else:
        perms = [[np.arange(PRIMES[j])] * n_digits[j] for j in range(dim)]
    points = np.empty((n, dim))
    for j in range(dim):
        points[:, j] = _radical_inverse(index, PRIMES[j], perms[j])
    return points


def transform_to_distribution(unit_points, space):
    """Map unit-cube points to the parameter space by per-column inverse CDF."""
    u = np.array(unit_points, dtype=float, ndmin=2)
    if u.shape[1] != space.dim:
        raise ShapeError(f"points have {u.shape[1]} columns, space has dim {space.dim}")
    if not np.all((u > 0) & (u < 1)):
        raise DomainError("unit points must lie strictly inside (0, 1)")
    return space.means + space.sds * ndtri(u)


def compute_voronoi_weights(alpha_samples, space, n_probe, seed=0, chunk=1 << 16):
    """Probability of each sample's Voronoi cell under the parameter density.

    Cells are taken in coordinates standardized by the marginal sds. The
    probability is estimated by classifying ``n_probe`` pseudo-random draws
    to their nearest sample; chunks are counted and merged in a fixed order.
    """
    alpha = np.array(alpha_samples, dtype=float, ndmin=2)
    n = alpha.shape[0]
    if n < 1:
        raise ShapeError("need at least one sample")
    if alpha.shape[1] != space.dim:
        raise ShapeError(f"samples have {alpha.shape[1]} columns, space has dim {space.dim}")
    if np.unique(alpha, axis=0).shape[0] != n:
        raise DuplicateSampleError("duplicate sample rows make Voronoi cells ambiguous")
    if n_probe < 100 * n:
        warnings.warn(
            f"n_probe={n_probe} is below 100 probes per sample; weights will be noisy",
            stacklevel=2,
        )
    if n == 1:
        return np.ones(1)
    z = (alpha - space.means) / space.sds
    tree = cKDTree(z)
    rng = np.random.default_rng(seed)
    counts = np.zeros(n, dtype=np.int64)
    remaining = int(n_probe)
    while remaining > 0:
        m = min(chunk, remaining)
        probes = rng.standard_normal((m, space.dim))
        _, nearest = tree.query(probes, k=1)
        counts += np.bincount(nearest, minlength=n)
        remaining -= m
    weights = counts / counts.sum()
    return weights / math.fsum(weights)


def rearrange_moments(alpha, weights, space):
    """Affinely rescale each coordinate so its weighted mean and sd match the marginal.

    Nearest-point quantization pulls the weighted second moment of a Voronoi
    point set below the target (by the quantization distortion); this is the
    per-coordinate correction applied after the weights are known.
    """
    alpha = np.array(alpha, dtype=float, ndmin=2)
    if alpha.shape[0] < 2:
        return alpha
    w = np.asarray(weights, dtype=float)
    mean = w @ alpha
    sd = np.sqrt(w @ (alpha - mean) ** 2)
    return space.means + space.sds * (alpha - mean) / sd


def gqmc_sample_set(space, n, seed=0, preset="WZ", probes_per_sample=1000, rearrange=True):
    """Scrambled-Halton points with Voronoi-probability weights.

    With ``rearrange`` the points are afterwards rescaled per coordinate so
    the weighted first two marginal moments are exact.
    """
    if preset not in PRESET_SEED_OFFSETS:
        raise DomainError(f"unknown preset {preset!r}; choose from {sorted(PRESET_SEED_OFFSETS)}")
    scramble_seed = seed + PRESET_SEED_OFFSETS[preset]
    unit = generate_halton(n, space.dim, seed=scramble_seed)
    alpha = transform_to_distribution(unit, space)
    n_probe = probes_per_sample * n
    weights = compute_voronoi_weights(alpha, space, n_probe, seed=scramble_seed + 1)
    if rearrange:
        alpha = rearrange_moments(alpha, weights, space)
    return WeightedSampleSet(
        alpha, weights, generator_tag=f"gqmc-halton-voronoi-{preset}", seed=seed,
        info={"n_probe": n_probe, "preset": preset, "rearranged": rearrange},
    )


def mc_sample_set(space, n, seed=0):
    """Pseudo-random draws with equal weights 1/n."""
    alpha = space.sample(n, seed)
    return WeightedSampleSet(alpha, np.full(n, 1.0 / n), generator_tag="mc", seed=seed)


def _two_product(a, b):
    # Dekker/Veltkamp error-free product: a*b == p + e exactly.
    split = 134217729.0  # 2**27 + 1
    p = a * b
    t = split * a
    ah = t - (t - a)
    al = a - ah
    t = split * b
    bh = t - (t - b)
    bl = b - bh
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def exact_dot(a, b):
    """Correctly rounded dot product of two 1-D float arrays."""
    p, e = _two_product(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    return math.fsum(np.concatenate([p, e]))


def quadrature(f_values, weights):
    """Weighted sum of integrand values, accumulated with error-free transforms."""
    f = np.asarray(f_values, dtype=float)
    w = np.asarray(weights, dtype=float)
    if f.ndim != 1 or f.shape != w.shape:
        raise ShapeError(f"f_values {f.shape} and weights {w.shape} must be equal-length vectors")
    if not np.all(np.isfinite(f)):
        raise NonFiniteInputError("integrand values must be finite")
    return exact_dot(w, f)
