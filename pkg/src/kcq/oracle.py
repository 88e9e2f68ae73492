"""Reference answers for tests: plain Monte Carlo databases and exact grid posteriors."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .database import ResponseDatabase
from .dynamics import QoISpec
from .errors import DegeneratePosteriorError, DomainError, ShapeError, SizeError
from .pipeline import build_system, generate_database
from .sampling import ParameterSpace, exact_dot, mc_sample_set


@dataclass(frozen=True)
class McConfig:
    n_mc: int = 100_000
    seed: int = 12345

    def __post_init__(self):
        if self.n_mc < 1:
            raise DomainError("n_mc must be at least 1")


def mc_sample_database(config, mc):
    """Same offline pipeline, fed pseudo-random draws with equal weights."""
    system = build_system(config)
    sample_set = mc_sample_set(system.space, mc.n_mc, seed=mc.seed)
    return generate_database(config, sample_set=sample_set, system=system)


@dataclass(frozen=True)
class GridProblem:
    """Finite parameter grid with prior masses, responses, and log likelihoods."""

    cells: np.ndarray
    prior: np.ndarray
    response: np.ndarray
    loglik: np.ndarray

    def __post_init__(self):
        cells = np.array(self.cells, dtype=float, ndmin=1)
        prior = np.asarray(self.prior, dtype=float).ravel()
        response = np.asarray(self.response, dtype=float).ravel()
        loglik = np.asarray(self.loglik, dtype=float).ravel()
        m = prior.size
        if m > 10**6:
            raise SizeError("brute-force grids are limited to 1e6 cells")
        if not (response.size == loglik.size == m and cells.shape[0] == m):
            raise ShapeError("cells, prior, response and loglik must have one entry per cell")
        if not np.all(prior > 0):
            raise DomainError("prior masses must be strictly positive")
        for name, arr in (("cells", cells), ("prior", prior), ("response", response),
                          ("loglik", loglik)):
            object.__setattr__(self, name, arr)


@dataclass(frozen=True)
class BruteForceResult:
    mean: float
    variance: float
    pmf: np.ndarray


def brute_force_conditional(problem):
    """Exact posterior mean, variance, and mass function on a finite grid."""
    ll = problem.loglik
    finite = np.isfinite(ll)
    if not np.any(finite):
        raise DegeneratePosteriorError("likelihood is zero on every cell")
    post = problem.prior * np.exp(ll - np.max(ll[finite]))
    total = math.fsum(post)
    if not total > 0:
        raise DegeneratePosteriorError("posterior mass is zero")
    pmf = post / total
    mean = exact_dot(pmf, problem.response)
    var = exact_dot(pmf, (problem.response - mean) ** 2)
    return BruteForceResult(mean, max(var, 0.0), pmf)


def conjugate_gaussian_problem(prior_mean=0.0, prior_sd=1.0, obs=0.7, noise_sd=0.5,
                               cells=10_000, half_width=10.0):
    """Gaussian prior on a regular grid, observed once through ``y = a + v``.

    Returns the grid problem and the closed-form posterior ``(mean, variance)``.
    """
    a = np.linspace(prior_mean - half_width * prior_sd, prior_mean + half_width * prior_sd, cells)
    z = (a - prior_mean) / prior_sd
    prior = np.exp(-0.5 * z * z)
    prior /= math.fsum(prior)
    loglik = -0.5 * ((obs - a) / noise_sd) ** 2 - math.log(math.sqrt(2 * math.pi) * noise_sd)
    post_var = 1.0 / (1.0 / prior_sd**2 + 1.0 / noise_sd**2)
    post_mean = post_var * (prior_mean / prior_sd**2 + obs / noise_sd**2)
    return GridProblem(a[:, None], prior, a, loglik), (post_mean, post_var)


def atoms_database(problem, sensor_values=None):
    """Database whose samples are the grid cells and weights the prior masses.

    The QoI channel (step 1) holds the response. The sensor channel holds
    ``sensor_values`` (defaults to the response) so a one-cell selection with
    matching noise reproduces the grid likelihood.
    """
    n = problem.prior.size
    g = problem.response
    h = g if sensor_values is None else np.asarray(sensor_values, dtype=float)
    qoi = QoISpec("displacement", dof=0)
    sensor = QoISpec("displacement", dof=0)
    qv = np.stack([np.zeros(n), g], axis=1)
    sv = np.stack([np.zeros(n), h], axis=1)
    w = problem.prior / math.fsum(problem.prior)
    space = ParameterSpace.standard(problem.cells.shape[1])
    return ResponseDatabase.from_arrays(problem.cells, w, [0.0, 1.0], [(qoi, qv)],
                                        [(sensor, sv)], space=space)
