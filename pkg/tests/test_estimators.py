import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad, trapezoid
from scipy.stats import norm

from helpers import U, measurements, toy_database
from kcq.errors import DegenerateLikelihoodError, GridError
from kcq.estimators import (_mean, _variance, bandwidth_rule, conservation_identity_check, default_grid,
                            effective_sample_size, full_chain_cq_diagnostic, kcq_mean, kcq_pdf,
                            kcq_variance, key_condition_quantify, likelihood_logweights,
                            nonconditional_stats, quantify, quotient_weights, select_bandwidth,
                            weighted_kde)
from kcq.measurement import KeyConditionSelection, correlation_coefficients, select_key_conditions
from kcq.sampling import ParameterSpace, gqmc_sample_set

LN3 = math.log(3.0)


def one_cell(z, sd=1.0):
    """Selection of the step-1 reading of sensor 0 with value z."""
    return KeyConditionSelection(((1, 0),), np.array([z]), np.zeros(1), np.array([[sd * sd]]), np.ones(1))


@pytest.fixture
def bernoulli():
    # g = (0, 1) with equal prior weights; likelihood ratio 1:3 from sensor predictions
    h = math.sqrt(2 * LN3)
    db = toy_database([[0.0, 0.0], [0.0, 1.0]], sensor_rows=[[0.0, h], [0.0, 0.0]])
    return db, one_cell(0.0)


# -- likelihood weights ----------------------------------------------------------

def test_logweights_hand_numbers(bernoulli):
    db, sel = bernoulli
    lw = likelihood_logweights(db, sel)
    base = math.log(0.5) - 0.5 * math.log(2 * math.pi)
    np.testing.assert_allclose(lw, [base - LN3, base], rtol=1e-14)


def test_logweights_common_constant_when_predictions_agree():
    db = toy_database(np.random.default_rng(0).normal(size=(6, 3)), sensor_rows=np.full((6, 3), 0.4),
                      weights=np.array([1, 2, 3, 4, 5, 5]) / 20)
    lw = likelihood_logweights(db, one_cell(1.3, sd=0.2))
    diff = lw - np.log(db.weights)
    np.testing.assert_allclose(diff, diff[0], rtol=0, atol=1e-12)


def test_far_measurement_degenerates():
    db = toy_database([[0.0, 0.0], [0.0, 1.0]], sensor_rows=[[0.0, 0.0], [0.0, 0.5]])
    sel = one_cell(-50.0, sd=1.0)
    assert np.all(likelihood_logweights(db, sel) <= math.log(0.5) - 1250)
    with pytest.raises(DegenerateLikelihoodError) as info:
        kcq_mean(db, sel, U, 1)
    assert info.value.ess == pytest.approx(1.0)


def test_effective_sample_size():
    assert effective_sample_size(np.full(7, 0.3)) == pytest.approx(7.0)
    assert effective_sample_size(np.array([1.0, 0.0, 0.0])) == 1.0
    assert effective_sample_size(np.zeros(3)) == 0.0


# -- mean and variance -----------------------------------------------------------

def test_bernoulli_hand_example(bernoulli):
    db, sel = bernoulli
    m = kcq_mean(db, sel, U, 1, ess_min=1)
    assert m == pytest.approx(0.75, rel=1e-15)
    assert kcq_variance(db, sel, U, 1, m, ess_min=1) == pytest.approx(0.1875, rel=1e-14)


def test_single_sample_ignores_likelihood():
    db = toy_database([[0.0, 2.5]], sensor_rows=[[0.0, 100.0]])
    sel = one_cell(0.0, sd=1.0)
    assert kcq_mean(db, sel, U, 1) == 2.5
    assert kcq_variance(db, sel, U, 1, 2.5) == 0.0


def test_constant_likelihood_reduces_exactly():
    rng = np.random.default_rng(1)
    q = rng.normal(size=(40, 3))
    w = rng.uniform(0.5, 1.5, 40)
    w /= w.sum()
    db = toy_database(q, sensor_rows=np.full((40, 3), -0.2), weights=w / math.fsum(w))
    cond = quantify(db, one_cell(0.7, 0.1), U, 2)
    base = nonconditional_stats(db, U, 2)
    assert cond.mean == base.mean and cond.variance == base.variance
    np.testing.assert_array_equal(cond.pdf_values, base.pdf_values)
    np.testing.assert_array_equal(cond.pdf_grid, base.pdf_grid)
    assert cond.bandwidth == base.bandwidth


def test_degenerate_error_carries_context():
    db = toy_database(np.arange(20.0).reshape(10, 2), sensor_rows=np.arange(20.0).reshape(10, 2))
    with pytest.raises(DegenerateLikelihoodError) as info:
        quantify(db, one_cell(3.0, sd=1e-3), U, 1)
    assert info.value.qoi == "u_dof0" and info.value.step == 1
    assert info.value.ess < 5


def test_guard_threshold_caps_at_sample_count():
    db = toy_database([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]], sensor_rows=np.zeros((3, 2)))
    assert kcq_mean(db, one_cell(0.0), U, 1, ess_min=5) == pytest.approx(1.0)


# -- bandwidth and density -------------------------------------------------------

def test_bandwidth_rule_values():
    assert bandwidth_rule(0.3, 1.0) == (pytest.approx(1.06 * 0.3), False)
    assert bandwidth_rule(0.02, 500.0)[0] == pytest.approx(0.00611, abs=1e-5)
    assert bandwidth_rule(0.04, 500.0)[0] == 2 * bandwidth_rule(0.02, 500.0)[0]
    sigma, floored = bandwidth_rule(0.0, 100.0, mean=3.0)
    assert floored and sigma == pytest.approx(1e-4 * 1e-8 * 3.0)


def test_select_bandwidth_uses_effective_size(bernoulli):
    db, sel = bernoulli
    sd = math.sqrt(0.1875)
    ess = (2 / 3) ** 2 / (1 / 36 + 9 / 36)
    assert select_bandwidth(db, sel, U, 1, ess_min=1) == pytest.approx(1.06 * sd * ess ** -0.2, rel=1e-14)


def test_single_kernel_peak():
    db = toy_database([[0.0, 0.4]])
    pdf = kcq_pdf(db, one_cell(0.0), U, 1, np.array([0.3, 0.4, 0.5]), 0.05)
    assert pdf[1] == pytest.approx(1 / (math.sqrt(2 * math.pi) * 0.05), rel=1e-15)


def test_lobe_masses(bernoulli):
    db, sel = bernoulli
    grid = np.linspace(-0.5, 1.5, 4001)
    pdf = kcq_pdf(db, sel, U, 1, grid, 0.01, ess_min=1)
    left = grid <= 0.5
    assert trapezoid(pdf[left], grid[left]) == pytest.approx(0.25, abs=1e-3)
    assert trapezoid(pdf[~left], grid[~left]) == pytest.approx(0.75, abs=1e-3)


def test_grid_validation(bernoulli):
    db, sel = bernoulli
    with pytest.raises(GridError):
        kcq_pdf(db, sel, U, 1, np.array([0.0, 0.0, 1.0]), 0.1, ess_min=1)
    with pytest.raises(GridError):
        weighted_kde(np.array([1.0]), np.zeros(2), np.ones(2), 0.1)


@pytest.fixture(scope="module")
def normal_db():
    ss = gqmc_sample_set(ParameterSpace.standard(2), 500, seed=0)
    a = ss.samples
    q = np.stack([np.zeros(500), a[:, 0], a[:, 0] + 0.3 * a[:, 1] ** 2], axis=1)
    s = np.stack([np.zeros(500), a[:, 0] + 0.1 * a[:, 1], a[:, 1]], axis=1)
    return toy_database(q, sensor_rows=s, weights=ss.weights, samples=a)


def test_nonconditional_passthrough_moments(normal_db):
    r = nonconditional_stats(normal_db, U, 1)
    assert r.mean == pytest.approx(0.0, abs=1e-2)
    assert r.variance == pytest.approx(1.0, abs=2e-2)
    c = nonconditional_stats(toy_database(np.full((5, 2), 1.7)), U, 1)
    assert c.mean == 1.7 and c.variance == 0.0 and c.bandwidth_floored


def test_default_grid_properties(normal_db):
    r = quantify(normal_db, one_cell(0.8, 0.3), U, 1)
    g = r.pdf_grid
    assert g.size >= 401 and g[0] <= r.mean - 6 * r.sd and g[-1] >= r.mean + 6 * r.sd
    assert np.all(r.pdf_values >= 0)
    assert trapezoid(r.pdf_values, g) == pytest.approx(1.0, abs=1e-3)
    first = trapezoid(g * r.pdf_values, g)
    peak = r.pdf_values.max()
    assert abs(first - r.mean) <= max(1e-3 * r.sd, 2 * (g[1] - g[0]) * peak)
    assert r.sd == math.sqrt(r.variance)


def test_default_grid_covers_far_samples():
    W = np.array([1.0, 1.0])
    g = np.array([0.0, 100.0])
    grid = default_grid(W, g, 0.0, 1.0, 0.5)
    assert grid[0] <= -6 and grid[-1] >= 102.5


def test_log_shift_invariance(normal_db):
    sel = one_cell(0.8, 0.3)
    ll = likelihood_logweights(normal_db, sel) - np.log(normal_db.weights)
    a = quotient_weights(normal_db, loglik=ll)
    for shift in (-700.0, 3.0, 1e4):
        b = quotient_weights(normal_db, loglik=ll + shift)
        np.testing.assert_allclose(b.W, a.W, rtol=1e-10)
        assert b.ess == pytest.approx(a.ess, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(1e-6, 1e6), st.integers(0, 1000))
def test_prior_rescaling_invariance(c, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=30)
    w = rng.uniform(0.1, 1, 30)
    lik = np.exp(rng.normal(size=30))
    grid = np.linspace(-4, 4, 101)
    W1, W2 = w * lik, (c * w) * lik
    m1, m2 = _mean(W1, math.fsum(W1), g), _mean(W2, math.fsum(W2), g)
    assert m2 == pytest.approx(m1, rel=1e-12, abs=1e-12)
    assert _variance(W2, math.fsum(W2), g, m2) == pytest.approx(_variance(W1, math.fsum(W1), g, m1), rel=1e-12)
    np.testing.assert_allclose(weighted_kde(grid, g, W2, 0.3), weighted_kde(grid, g, W1, 0.3), rtol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 40), st.integers(0, 1000), st.floats(0.01, 2))
def test_kde_normalized_and_nonnegative(n, seed, sd):
    rng = np.random.default_rng(seed)
    q = np.stack([np.zeros(n), rng.normal(size=n)], axis=1)
    s = np.stack([np.zeros(n), rng.normal(size=n)], axis=1)
    db = toy_database(q, sensor_rows=s)
    try:
        r = quantify(db, one_cell(0.2, sd), U, 1, ess_min=1)
    except DegenerateLikelihoodError:
        return
    assert np.all(r.pdf_values >= 0)
    assert trapezoid(r.pdf_values, r.pdf_grid) == pytest.approx(1.0, abs=1e-3)
    assert r.variance >= 0


# -- key-condition path and full chain ---------------------------------------------

def test_key_condition_quantify_matches_manual(normal_db):
    meas = measurements([[0.5], [0.2]], sd=0.3)
    r = key_condition_quantify(normal_db, meas, U, 2, 1)
    corr = correlation_coefficients(normal_db, U, 2, meas.model)
    sel = select_key_conditions(corr, meas, 1, meas.model)
    assert r.selection.entries == sel.entries
    manual = quantify(normal_db, sel, U, 2)
    assert manual.mean == r.mean and manual.variance == r.variance


def test_full_chain_single_cell_matches_kcq(normal_db):
    meas = measurements([[0.5]], sd=0.3)
    d = full_chain_cq_diagnostic(normal_db, meas, U, 1)
    k = quantify(normal_db, one_cell(0.5, 0.3), U, 1)
    assert d.n_conditions == 1
    assert d.mean == k.mean and d.variance == k.variance and d.ess == k.ess


def test_full_chain_flat_noise_keeps_all_samples(normal_db):
    meas = measurements([[0.5], [0.2]], sd=1e3)
    d = full_chain_cq_diagnostic(normal_db, meas, U, 2)
    ess_prior = effective_sample_size(normal_db.weights)
    assert d.ess == pytest.approx(ess_prior, rel=1e-5)


def test_full_chain_reports_collapse_instead_of_raising():
    db = toy_database(np.arange(20.0).reshape(10, 2), sensor_rows=np.arange(20.0).reshape(10, 2))
    d = full_chain_cq_diagnostic(db, measurements([[3.0]], sd=1e-4), U, 1)
    assert d.ess == pytest.approx(1.0)


# -- conservation identity -------------------------------------------------------

STD = ParameterSpace.standard(1)


def test_identity_map_density():
    assert conservation_identity_check(lambda a: a[:, 0], STD, 500, 0.15, target_pdf=norm.pdf) < 0.01


def test_identity_map_against_pseudorandom_reference():
    assert conservation_identity_check(lambda a: a[:, 0], STD, 500, 0.15, n_ref=10**6) < 0.01


def test_constant_map_collapses_to_one_kernel():
    sigma = 0.05
    gap = conservation_identity_check(lambda a: np.full(len(a), 2.0), STD, 500, sigma,
                                      target_pdf=lambda x: norm.pdf(x, 2.0, sigma))
    assert gap < 1e-9
    grid = np.linspace(2 - 6 * sigma, 2 + 6 * sigma, 801)
    pdf = weighted_kde(grid, np.full(500, 2.0), np.full(500, 1 / 500), sigma)
    assert trapezoid(pdf, grid) == pytest.approx(1.0, abs=1e-3)


def _smoothed_chi2(sigma):
    # chi-square(1) density convolved with the Gaussian kernel, via y = t^2
    def pdf(xs):
        out = []
        for x in xs:
            pts = [math.sqrt(x)] if 0 < x < 144 else None
            v, _ = quad(lambda t: 2 * norm.pdf(t) * norm.pdf((x - t * t) / sigma) / sigma, 0, 12,
                        limit=400, points=pts)
            out.append(v)
        return np.array(out)
    return pdf


def test_square_map_chi_square_density():
    sigma = 0.15
    grid = np.linspace(-1, 12, 500)
    gap = conservation_identity_check(lambda a: a[:, 0] ** 2, STD, 500, sigma, grid=grid,
                                      target_pdf=_smoothed_chi2(sigma), exclude=(-0.05, 0.05))
    assert gap < 0.05
