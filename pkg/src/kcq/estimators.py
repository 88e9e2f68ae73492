"""Key-condition quotient estimators: conditional mean, variance, and density.

Every estimator is a ratio ``sum_i W_i g_i / sum_i W_i`` with
``W_i = w_i * exp(l_i - max l)``, where ``w_i`` are the prior quadrature
weights and ``l_i`` the log likelihood of the selected conditions for
sample i. When the likelihood is constant ``W_i == w_i`` bit for bit, so the
non-conditional estimators are the same code path with no selection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dynamics import QoISpec
from .errors import (
    CoverageError,
    DegenerateLikelihoodError,
    GridError,
    ShapeError,
)
from .measurement import (
    KeyConditionSelection,
    all_conditions,
    correlation_coefficients,
    gaussian_error_logpdf,
    select_key_conditions,
)
from .sampling import exact_dot, gqmc_sample_set

DEFAULT_ESS_MIN = 5.0
SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class KcqResult:
    qoi: QoISpec
    step: int
    mean: float
    variance: float
    sd: float
    pdf_grid: np.ndarray
    pdf_values: np.ndarray
    ess: float
    bandwidth: float
    bandwidth_floored: bool = False
    selection: Optional[KeyConditionSelection] = field(default=None, compare=False)


def predicted_conditions(db, sel):
    """Database readings at the selected cells, shape ``(n, N_k)``."""
    cols = []
    for i, j in sel.entries:
        if not 0 <= i <= db.n_steps:
            raise CoverageError(f"selected step {i} outside database horizon")
        cols.append(db.sensor(j)[:, i])
    return np.stack(cols, axis=1)


def likelihood_logweights(db, sel):
    """``log w_i + log rho_beta(z - h_i)`` for every sample."""
    h = predicted_conditions(db, sel)
    with np.errstate(divide="ignore"):
        logw = np.log(db.weights)
    return logw + gaussian_error_logpdf(sel.z - h, sel)


def _loglik(db, sel):
    h = predicted_conditions(db, sel)
    return gaussian_error_logpdf(sel.z - h, sel)


@dataclass(frozen=True)
class _Weights:
    W: np.ndarray
    total: float
    ess: float


def effective_sample_size(W):
    s1 = math.fsum(W)
    s2 = math.fsum(W * W)
    if not (s1 > 0 and s2 > 0):
        return 0.0
    return s1 * s1 / s2


def quotient_weights(db, sel=None, loglik=None):
    """Unnormalized posterior weights ``w * exp(l - max l)`` plus their ess."""
    w = np.asarray(db.weights, dtype=float)
    if sel is None and loglik is None:
        W = w
    else:
        ll = _loglik(db, sel) if loglik is None else np.asarray(loglik, dtype=float)
        if ll.shape != w.shape:
            raise ShapeError("one log likelihood per sample is required")
        live = w > 0
        top = np.max(ll[live]) if np.any(live) else -np.inf
        if not np.isfinite(top):
            W = np.zeros_like(w)
        else:
            W = w * np.exp(ll - top)
    return _Weights(W, math.fsum(W), effective_sample_size(W))


def _guard(wts, ess_min, n, qoi=None, step=None):
    threshold = min(ess_min, n)
    if not (wts.total > 0) or wts.ess < threshold:
        raise DegenerateLikelihoodError(wts.ess, threshold,
                                        None if qoi is None else qoi.label, step)


def _values(db, qoi, k):
    if not 0 <= k <= db.n_steps:
        raise CoverageError(f"step {k} outside database horizon 0..{db.n_steps}")
    return db.qoi(qoi)[:, k]


def _mean(W, total, g):
    return exact_dot(W, g) / total


def _variance(W, total, g, mean):
    d = g - mean
    var = exact_dot(W, d * d) / total
    if var < 0 and var > -1e-14 * mean * mean:
        var = 0.0
    return max(var, 0.0)


def kcq_mean(db, sel, qoi, k, ess_min=DEFAULT_ESS_MIN):
    wts = quotient_weights(db, sel)
    _guard(wts, ess_min, db.n, qoi, k)
    return _mean(wts.W, wts.total, _values(db, qoi, k))


def kcq_variance(db, sel, qoi, k, mean, ess_min=DEFAULT_ESS_MIN):
    wts = quotient_weights(db, sel)
    _guard(wts, ess_min, db.n, qoi, k)
    return _variance(wts.W, wts.total, _values(db, qoi, k), mean)


def bandwidth_rule(sd, ess, mean=0.0):
    """Rule-of-thumb Gaussian bandwidth with the likelihood-effective sample size.

    Returns ``(sigma, floored)``; the floor ``1e-4 (sd + tiny)`` keeps sigma
    positive for degenerate spreads.
    """
    tiny = 1e-8 * max(abs(mean), 1.0)
    floor = 1e-4 * (sd + tiny)
    sigma = 1.06 * sd * ess ** (-0.2) if ess > 0 else 0.0
    if sigma < floor:
        return floor, True
    return sigma, False


def select_bandwidth(db, sel, qoi, k, ess_min=DEFAULT_ESS_MIN):
    wts = quotient_weights(db, sel)
    _guard(wts, ess_min, db.n, qoi, k)
    g = _values(db, qoi, k)
    mean = _mean(wts.W, wts.total, g)
    sd = math.sqrt(_variance(wts.W, wts.total, g, mean))
    return bandwidth_rule(sd, wts.ess, mean)[0]


def default_grid(W, g, mean, sd, sigma, min_points=401, max_points=20001):
    """Grid covering ``mean +- 6 sd`` and every significant kernel ``+- 5 sigma``."""
    share = W / max(np.max(W), 1e-300)
    sig = g[share > 1e-12]
    lo = min(mean - 6 * sd, float(np.min(sig)) - 5 * sigma)
    hi = max(mean + 6 * sd, float(np.max(sig)) + 5 * sigma)
    points = int(np.clip(math.ceil((hi - lo) / (sigma / 4.0)) + 1, min_points, max_points))
    return np.linspace(lo, hi, points)


def _check_grid(grid):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
        raise GridError("grid must be a strictly increasing vector of at least 2 points")
    return grid


def weighted_kde(grid, g, W, sigma, chunk=1 << 22):
    """``sum_i W_i phi_sigma(u - g_i) / sum_i W_i`` on a grid."""
    grid = _check_grid(grid)
    W = np.asarray(W, dtype=float)
    g = np.asarray(g, dtype=float)
    total = math.fsum(W)
    keep = W > 0
    W, g = W[keep] / total, g[keep]
    out = np.zeros(grid.size)
    step = max(1, chunk // max(g.size, 1))
    for start in range(0, grid.size, step):
        u = grid[start : start + step]
        z = (u[:, None] - g[None, :]) / sigma
        out[start : start + step] = np.exp(-0.5 * z * z) @ W
    return out / (SQRT_2PI * sigma)


def kcq_pdf(db, sel, qoi, k, grid, sigma, ess_min=DEFAULT_ESS_MIN):
    wts = quotient_weights(db, sel)
    _guard(wts, ess_min, db.n, qoi, k)
    return weighted_kde(grid, _values(db, qoi, k), wts.W, sigma)


def _result(db, wts, qoi, k, grid, sigma, sel):
    g = _values(db, qoi, k)
    mean = _mean(wts.W, wts.total, g)
    var = _variance(wts.W, wts.total, g, mean)
    sd = math.sqrt(var)
    floored = False
    if sigma is None:
        sigma, floored = bandwidth_rule(sd, wts.ess, mean)
    if grid is None:
        grid = default_grid(wts.W, g, mean, sd, sigma)
    grid = _check_grid(grid)
    pdf = weighted_kde(grid, g, wts.W, sigma)
    grid.flags.writeable = False
    pdf.flags.writeable = False
    return KcqResult(qoi, k, mean, var, sd, grid, pdf, wts.ess, sigma, floored, sel)


def quantify(db, sel, qoi, k, grid=None, sigma=None, ess_min=DEFAULT_ESS_MIN):
    """Conditional mean, variance, and density of one QoI at step k."""
    wts = quotient_weights(db, sel)
    _guard(wts, ess_min, db.n, qoi, k)
    return _result(db, wts, qoi, k, grid, sigma, sel)


def nonconditional_stats(db, qoi, k, grid=None, sigma=None):
    """Prior-weighted mean, variance, and density, returned as a KcqResult."""
    wts = quotient_weights(db, None)
    return _result(db, wts, qoi, k, grid, sigma, None)


def key_condition_quantify(db, meas, qoi, k, N_k, grid=None, sigma=None,
                           ess_min=DEFAULT_ESS_MIN):
    """Correlation ranking, key-condition selection, and estimation at step k."""
    r = correlation_coefficients(db, qoi, k, meas.model)
    sel = select_key_conditions(r, meas, N_k, meas.model)
    return quantify(db, sel, qoi, k, grid=grid, sigma=sigma, ess_min=ess_min)


@dataclass(frozen=True)
class FullChainDiagnostic:
    mean: float
    variance: float
    ess: float
    n_conditions: int


def full_chain_cq_diagnostic(db, meas, qoi, k):
    """Estimators conditioned on every measurement up to step k.

    The effective sample size is returned instead of enforced, so callers can
    watch it collapse as conditions accumulate.
    """
    sel = all_conditions(meas, k, meas.model)
    wts = quotient_weights(db, sel)
    g = _values(db, qoi, k)
    if wts.total > 0:
        mean = _mean(wts.W, wts.total, g)
        var = _variance(wts.W, wts.total, g, mean)
    else:
        mean = var = float("nan")
    return FullChainDiagnostic(mean, var, wts.ess, sel.n_k)


def _binned_kde(grid, values, sigma, bin_frac=0.1):
    # KDE of many equal-weight values: histogram on a fine grid, then smooth.
    lo = min(grid[0], values.min()) - 6 * sigma
    hi = max(grid[-1], values.max()) + 6 * sigma
    width = sigma * bin_frac
    n_bins = int(math.ceil((hi - lo) / width))
    counts, edges = np.histogram(values, bins=n_bins, range=(lo, lo + n_bins * width))
    centers = 0.5 * (edges[:-1] + edges[1:])
    nz = counts > 0
    return weighted_kde(grid, centers[nz], counts[nz].astype(float), sigma)


def conservation_identity_check(f, space, n, sigma, seed=0, n_ref=10**6, grid=None,
                                target_pdf=None, exclude=None, probes_per_sample=1000):
    """Max gap between two estimates of the density of ``zeta = f(alpha)``.

    (a) Gaussian-smoothed delta over the weighted quadrature points;
    (b) ``target_pdf`` if given, else the same smoothing applied to ``n_ref``
    pseudo-random draws. ``exclude`` is an optional ``(lo, hi)`` band left out
    of the comparison.
    """
    ss = gqmc_sample_set(space, n, seed=seed, probes_per_sample=probes_per_sample)
    zeta = np.asarray(f(ss.samples), dtype=float).ravel()
    if grid is None:
        centre = float(exact_dot(ss.weights, zeta))
        spread = math.sqrt(max(exact_dot(ss.weights, (zeta - centre) ** 2), 0.0))
        lo = min(zeta.min(), centre - 6 * spread) - 5 * sigma
        hi = max(zeta.max(), centre + 6 * spread) + 5 * sigma
        grid = np.linspace(lo, hi, max(401, int((hi - lo) / (sigma / 4)) + 1))
    grid = _check_grid(grid)
    est = weighted_kde(grid, zeta, ss.weights, sigma)
    if target_pdf is not None:
        ref = np.asarray(target_pdf(grid), dtype=float)
    else:
        draws = np.asarray(f(space.sample(n_ref, seed + 7_777)), dtype=float).ravel()
        ref = _binned_kde(grid, draws, sigma)
    mask = np.ones(grid.size, dtype=bool)
    if exclude is not None:
        mask &= ~((grid > exclude[0]) & (grid < exclude[1]))
    return float(np.max(np.abs(est - ref)[mask]))
