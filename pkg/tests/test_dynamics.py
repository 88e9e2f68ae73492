import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kcq.dynamics import (QoISpec, bridge_load, hermite, integrate, integrate_batch, make_beam_system,
                          make_linear_system, make_sdof_system, midpoint_step, qoi_value,
                          rayleigh_coefficients, rayleigh_damping, record_row)
from kcq.errors import (ConvergenceError, DegenerateFrequenciesError, DomainError, NonFiniteInputError,
                        ResolutionError)

TIP = QoISpec("displacement", x=3.0)


def terminal_qoi(system, alpha, T, dt, spec, tol=1e-13):
    n = int(round(T / dt))
    out, _ = integrate_batch(system, alpha, dt, n, tol=tol, record=record_row(system, spec)[None])
    return out[0, 0, -1]


def observed_order(system, alpha, T, dt, spec):
    ref = terminal_qoi(system, alpha, T, dt / 100, spec)
    e1 = abs(terminal_qoi(system, alpha, T, dt, spec) - ref)
    e2 = abs(terminal_qoi(system, alpha, T, dt / 2, spec) - ref)
    return math.log2(e1 / e2)


# -- integrator ----------------------------------------------------------------

def test_zero_vector_field_is_fixed():
    sys = make_linear_system([[1.0]], [[0.0]], [[0.0]])
    np.testing.assert_array_equal(midpoint_step(sys, [0.0], [1.0, 0.0], 0.0, 0.1), [1.0, 0.0])


def test_oscillator_energy_per_step():
    sys = make_linear_system([[1.0]], [[0.0]], [[1.0]])
    U = np.array([1.0, 0.0])
    for _ in range(100):
        U_new = midpoint_step(sys, [0.0], U, 0.0, 0.01)
        assert abs(0.5 * (U_new @ U_new) - 0.5 * (U @ U)) < 1e-10
        U = U_new


def test_energy_drift_over_many_steps():
    M = np.array([[2.0, 0.3], [0.3, 1.0]])
    K = np.array([[5.0, -2.0], [-2.0, 3.0]])
    sys = make_linear_system(M, np.zeros((2, 2)), K, U0=[1.0, -0.5, 0.2, 0.4])
    traj = integrate(sys, [0.0], 0.01, 10**4)
    u, s = traj.displacements, traj.velocities
    E = 0.5 * np.einsum("ti,ij,tj->t", s, M, s) + 0.5 * np.einsum("ti,ij,tj->t", u, K, u)
    assert np.max(np.abs(E / E[0] - 1)) < 1e-9


def test_zero_steps_returns_initial_state():
    sys = make_linear_system([[1.0]], [[0.0]], [[1.0]], U0=[0.3, -0.2])
    traj = integrate(sys, [0.0], 0.1, 0)
    np.testing.assert_array_equal(traj.states, [[0.3, -0.2]])
    np.testing.assert_array_equal(traj.times, [0.0])


def test_trajectory_is_composition_of_steps():
    sys = make_sdof_system()
    a = np.array([0.1, -0.2])
    traj = integrate(sys, a, 0.05, 5)
    U = traj.states[0]
    for k in range(5):
        U = midpoint_step(sys, a, U, k * 0.05, 0.05)
        np.testing.assert_array_equal(U, traj.states[k + 1])


def test_sdof_single_step_second_order():
    sys = make_sdof_system()
    zero = np.zeros(2)
    ref = integrate(sys, zero, 1e-5, 5000).states[-1]
    one = integrate(sys, zero, 0.05, 1).states[-1]
    half = integrate(sys, zero, 0.025, 2).states[-1]
    e1, e2 = np.abs(one - ref).max(), np.abs(half - ref).max()
    assert e1 < 0.05 ** 2
    assert 3.0 < e1 / e2 < 5.0


def test_sdof_terminal_displacement_against_fine_run():
    sys = make_sdof_system()
    coarse = integrate(sys, np.zeros(2), 0.05, 200).displacements[-1, 0]
    fine = integrate(sys, np.zeros(2), 1e-4, 10**5).displacements[-1, 0]
    assert coarse == pytest.approx(fine, rel=1e-2)


def test_undamped_order_two():
    sys = make_linear_system([[1.0]], [[0.0]], [[4.0]], load=lambda t: [math.cos(t)])
    assert 1.8 <= observed_order(sys, [0.0], 5.0, 0.05, QoISpec(dof=0)) <= 2.2


def test_sdof_order_two():
    sys = make_sdof_system()
    assert 1.8 <= observed_order(sys, [0.1, -0.1], 10.0, 0.05, QoISpec(dof=0)) <= 2.2


def test_beam_order_two():
    # step sizes small against the highest element mode so the error is asymptotic
    sys = make_beam_system(2)
    assert 1.8 <= observed_order(sys, np.full(10, 0.3), 1e-3, 2e-5, TIP) <= 2.2


def test_integration_is_deterministic():
    sys = make_beam_system(3)
    a = np.random.default_rng(1).standard_normal((4, 10))
    x, _ = integrate_batch(sys, a, 1e-3, 20)
    y, _ = integrate_batch(sys, a, 1e-3, 20)
    np.testing.assert_array_equal(x, y)


def test_batch_matches_single():
    sys = make_sdof_system()
    a = np.random.default_rng(2).normal(0, 0.2, (3, 2))
    batch, _ = integrate_batch(sys, a, 0.05, 40)
    for i in range(3):
        np.testing.assert_allclose(batch[i], integrate(sys, a[i], 0.05, 40).states, rtol=1e-12, atol=1e-14)


def test_convergence_failure_is_reported():
    sys = make_beam_system(4)
    with pytest.raises(ConvergenceError):
        midpoint_step(sys, np.zeros(10), np.zeros(24), 0.0, 1e-3, tol=1e-14, max_iter=1)
    out, failed = integrate_batch(sys, np.zeros((2, 10)), 1e-3, 3, tol=1e-14, max_iter=1, on_failure="mask")
    assert failed.all()
    np.testing.assert_array_equal(out[:, -1], out[:, 0])


def test_step_argument_errors():
    sys = make_sdof_system()
    with pytest.raises(DomainError):
        midpoint_step(sys, [0, 0], [0, 0], 0.0, 0.0)
    with pytest.raises(NonFiniteInputError):
        midpoint_step(sys, [0, 0], [np.nan, 0], 0.0, 0.1)
    with pytest.raises(DomainError):
        integrate_batch(sys, [0, 0], 0.1, -1)


# -- quantities of interest ----------------------------------------------------

@pytest.fixture(scope="module")
def beam_traj():
    sys = make_beam_system(4)
    return sys, integrate(sys, np.full(10, 0.2), 1e-3, 30)


def test_qoi_at_node(beam_traj):
    sys, traj = beam_traj
    # node 2 sits at x = 1.5 m; its transverse dof is index 3*1 + 1 in the reduced vector
    assert qoi_value(traj, QoISpec(x=1.5), 30, sys) == traj.displacements[30, 4]
    assert qoi_value(traj, TIP, 30, sys) == traj.displacements[30, 10]
    assert qoi_value(traj, QoISpec(dof=10), 30, sys) == traj.displacements[30, 10]
    assert qoi_value(traj, QoISpec(x=3.0, component="axial"), 30, sys) == traj.displacements[30, 9]


def test_qoi_mid_element_matches_cubic_through_end_data(beam_traj):
    sys, traj = beam_traj
    u = traj.displacements[30]
    h = 0.75
    # element 2 spans [0.75, 1.5]; end values and slopes fix the cubic
    wa, ta, wb, tb = u[1], u[2], u[4], u[5]
    V = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [1, h, h ** 2, h ** 3], [0, 1, 2 * h, 3 * h ** 2]], float)
    coef = np.linalg.solve(V, [wa, ta, wb, tb])
    for x in (0.8, 1.0, 1.3):
        assert qoi_value(traj, QoISpec(x=x), 30, sys) == pytest.approx(np.polyval(coef[::-1], x - 0.75),
                                                                       rel=1e-10, abs=1e-15)


def test_velocity_qoi_starts_at_zero(beam_traj):
    sys, traj = beam_traj
    assert qoi_value(traj, QoISpec("velocity", x=2.1), 0, sys) == 0.0


def test_qoi_resolution_errors(beam_traj):
    sys, traj = beam_traj
    with pytest.raises(ResolutionError):
        qoi_value(traj, QoISpec(x=3.5), 0, sys)
    with pytest.raises(ResolutionError):
        qoi_value(traj, QoISpec(dof=99), 0, sys)
    with pytest.raises(IndexError):
        qoi_value(traj, TIP, 31, sys)


@given(st.sampled_from(["displacement", "velocity"]), st.integers(0, 50))
def test_dof_label_roundtrip(kind, dof):
    spec = QoISpec(kind, dof=dof)
    assert QoISpec.from_label(spec.label) == spec


@given(st.sampled_from(["displacement", "velocity"]), st.sampled_from([0.0, 0.9, 1.25, 2.1, 3.0]),
       st.sampled_from(["transverse", "axial"]))
def test_coordinate_label_roundtrip(kind, x, comp):
    spec = QoISpec(kind, x=x, component=comp)
    assert QoISpec.from_label(spec.label) == spec


def test_qoi_spec_validation():
    with pytest.raises(DomainError):
        QoISpec("acceleration", dof=0)
    with pytest.raises(DomainError):
        QoISpec(dof=0, x=1.0)
    with pytest.raises(DomainError):
        QoISpec.from_label("q_dof0")


# -- built-in systems ----------------------------------------------------------

def test_sdof_parameters():
    sys = make_sdof_system()
    a = np.array([[0.0, 0.0], [0.2, 0.0]])
    assert sys.stiffness(np.zeros((1, 1)), a[:1])[0, 0, 0] == 11.0
    assert sys.damping(a)[1, 0, 0] == pytest.approx(6.0, rel=1e-15)
    assert sys.mass(a)[0, 0, 0] == 5.0
    assert sys.load(0.0, a)[0, 0] == 0.0
    assert sys.load(0.5, a)[0, 0] == pytest.approx(10 * math.sin(1.5))
    assert sys.space.sds.tolist() == [0.2, 0.2]


def test_beam_nominal_modulus_and_rest_state():
    sys = make_beam_system(10)
    model = sys.info["model"]
    np.testing.assert_array_equal(model.element_moduli(np.zeros((1, 10))), np.full((1, 10), 2e11))
    np.testing.assert_array_equal(sys.restoring(np.zeros((2, 30)), np.ones((2, 10))), 0.0)
    M = sys.mass(np.zeros((1, 10)))[0]
    np.testing.assert_allclose(M, M.T)
    assert np.linalg.eigvalsh(M).min() > 0
    # the clamped node keeps its half-element share of the load
    assert np.sum(model.load_vector()[1::3]) == pytest.approx(-5e4 * (3.0 - 0.15))


def test_beam_static_linear_tip():
    sys = make_beam_system(10, nonlinear=False, load_scale=1e-6)
    model = sys.info["model"]
    K = model.tangent(np.zeros((1, 30)), np.zeros((1, 10)))[0]
    u = np.linalg.solve(K, model.load_vector())
    EI = 2e11 * 0.1 ** 4 / 12
    assert u[-2] == pytest.approx(-5e4 * 1e-6 * 3.0 ** 4 / (8 * EI), rel=1e-2)


def test_beam_force_is_energy_gradient():
    model = make_beam_system(4).info["model"]
    rng = np.random.default_rng(3)
    for _ in range(10):
        u = rng.normal(0, 0.02, (1, 12))
        a = rng.standard_normal((1, 10))
        F = model.restoring(u, a)[0]
        grad = np.empty(12)
        for j in range(12):
            h = 1e-7 * max(1.0, abs(u[0, j]))
            up, um = u.copy(), u.copy()
            up[0, j] += h
            um[0, j] -= h
            grad[j] = (model.strain_energy(up, a)[0] - model.strain_energy(um, a)[0]) / (2 * h)
        assert np.abs(F - grad).max() / np.abs(F).max() < 1e-6


def test_beam_tangent_matches_finite_differences():
    model = make_beam_system(3).info["model"]
    rng = np.random.default_rng(4)
    u = rng.normal(0, 0.05, (1, 9))
    a = rng.standard_normal((1, 10))
    K = model.tangent(u, a)[0]
    J = np.empty((9, 9))
    for j in range(9):
        h = 1e-7
        up, um = u.copy(), u.copy()
        up[0, j] += h
        um[0, j] -= h
        J[:, j] = (model.restoring(up, a)[0] - model.restoring(um, a)[0]) / (2 * h)
    assert np.abs(K - J).max() / np.abs(K).max() < 1e-6
    np.testing.assert_allclose(K, K.T, rtol=1e-12, atol=1e-6 * np.abs(K).max())


def test_beam_needs_two_elements():
    with pytest.raises(DomainError):
        make_beam_system(1)


def test_hermite_partition_and_nodes():
    s = np.linspace(0, 1, 11)
    H = hermite(s, 0.5)
    np.testing.assert_allclose(H[:, 0] + H[:, 2], 1.0, atol=1e-15)
    np.testing.assert_array_equal(hermite(0.0, 0.5), [1, 0, 0, 0])
    np.testing.assert_array_equal(hermite(1.0, 0.5), [0, 0, 1, 0])


# -- forcing and damping helpers -----------------------------------------------

def test_bridge_load_values():
    assert bridge_load(0.0) == 0.0
    assert bridge_load(20.0) == pytest.approx(1.0e5 * math.sin(32.0), rel=1e-14)
    assert bridge_load(10.0) == pytest.approx(-1.0e5 * (math.sin(2.0) - math.sin(18.0)), rel=1e-14)
    with pytest.raises(DomainError):
        bridge_load(-1.0)


def test_rayleigh_recovers_modal_ratio():
    a, b = rayleigh_coefficients(0.03, (2.0, 5.0))
    for w in (2.0, 5.0):
        assert (a / w + b * w) / 2 == pytest.approx(0.03, abs=1e-12)
    M, K = np.eye(2), np.diag([4.0, 25.0])
    np.testing.assert_array_equal(rayleigh_damping(M, K, 0.0, (2.0, 5.0)), np.zeros((2, 2)))
    with pytest.raises(DegenerateFrequenciesError):
        rayleigh_coefficients(0.03, (3.0, 3.0))
    with pytest.raises(DomainError):
        rayleigh_coefficients(0.03, (0.0, 3.0))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.floats(0.05, 2))
def test_undamped_linear_energy_property(m, k, u0):
    sys = make_linear_system([[m]], [[0.0]], [[k]], U0=[u0, 0.0])
    traj = integrate(sys, [0.0], 0.05, 500)
    E = 0.5 * m * traj.velocities[:, 0] ** 2 + 0.5 * k * traj.displacements[:, 0] ** 2
    assert np.max(np.abs(E / E[0] - 1)) < 1e-9
