"""Dynamics models: step arithmetic, Jacobians, rollout, and guards."""

import numpy as np
import pytest

from layered_ocp import dynamics
from layered_ocp.errors import DivergenceError


def test_linear_step_matches_matrix_arithmetic():
    model = dynamics.double_integrator_2d()
    out = dynamics.step(model, np.array([1.0, 1.0]), np.zeros(2))
    np.testing.assert_array_equal(out, np.array([2.0, 1.0]))


def test_unicycle_step_straight_line():
    model = dynamics.unicycle(dt=0.1)
    out = dynamics.step(model, np.zeros(3), np.array([1.0, 0.0]))
    np.testing.assert_allclose(out, np.array([0.1, 0.0, 0.0]), atol=1e-15)


def test_cartpole_upright_is_fixed_point():
    model = dynamics.cartpole()
    x_eq = np.array([0.0, np.pi, 0.0, 0.0])
    out = dynamics.step(model, x_eq, np.zeros(1))
    # sin(pi) is ~1e-16 in floats, so the fixed point holds to machine noise.
    np.testing.assert_allclose(out, x_eq, atol=1e-14)


def test_step_rejects_bad_shapes_and_nonfinite():
    model = dynamics.double_integrator_2d()
    with pytest.raises(ValueError):
        dynamics.step(model, np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError):
        dynamics.step(model, np.zeros(2), np.zeros(1))
    with pytest.raises(ValueError):
        dynamics.step(model, np.array([np.nan, 0.0]), np.zeros(2))


def test_euler_discretize_zero_rhs_is_identity():
    model = dynamics.euler_discretize(
        lambda x, u: np.zeros_like(x), dt=0.05, state_dim=3, input_dim=1
    )
    x = np.array([1.0, -2.0, 0.5])
    np.testing.assert_array_equal(dynamics.step(model, x, np.zeros(1)), x)


def test_euler_discretize_rejects_nonpositive_dt():
    with pytest.raises(ValueError):
        dynamics.euler_discretize(lambda x, u: x, dt=0.0, state_dim=1, input_dim=1)
    with pytest.raises(ValueError):
        dynamics.euler_discretize(lambda x, u: x, dt=-0.1, state_dim=1, input_dim=1)


def test_unicycle_heading_along_second_axis():
    model = dynamics.unicycle(dt=0.1)
    out = dynamics.step(model, np.array([0.0, 0.0, np.pi / 2]), np.array([1.0, 0.0]))
    np.testing.assert_allclose(out, np.array([0.0, 0.1, np.pi / 2]), atol=1e-15)


def test_cartpole_rhs_matches_manipulator_assembly():
    # Frozen regression point: manipulator form H(q) qdd = F - C(q, qd) qd - G(q)
    # assembled independently at a seeded sample.
    x = np.array(
        [0.5479120971119267, -0.12224312049589536, 0.7171958398227649, 0.3947360581187278]
    )
    u = np.array([-4.058226521123505])
    expected_rhs = np.array(
        [0.7171958398227649, 0.3947360581187278, -4.172651564401969, 5.3377341555931235]
    )
    model = dynamics.cartpole()
    got = (dynamics.step(model, x, u) - x) / model.dt
    np.testing.assert_allclose(got, expected_rhs, rtol=1e-12, atol=1e-12)


def test_euler_rhs_recovery():
    # (f(x,u) - x)/dt reproduces the continuous rhs to machine precision.
    model = dynamics.unicycle(dt=0.1)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = rng.standard_normal(3)
        u = rng.standard_normal(2)
        rhs = np.array([u[0] * np.cos(x[2]), u[0] * np.sin(x[2]), u[1]])
        got = (dynamics.step(model, x, u) - x) / model.dt
        np.testing.assert_allclose(got, rhs, rtol=1e-12, atol=1e-12)


def test_linear_jacobians_are_exact_constants():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    model = dynamics.linear_model(A, np.eye(2))
    rng = np.random.default_rng(1)
    for _ in range(5):
        Aj, Bj = dynamics.linearize(model, rng.standard_normal(2), rng.standard_normal(2))
        np.testing.assert_array_equal(Aj, A)
        np.testing.assert_array_equal(Bj, np.eye(2))


def test_unicycle_jacobian_zero_heading_entry():
    model = dynamics.unicycle(dt=0.1)
    A, _ = dynamics.linearize(model, np.zeros(3), np.array([1.0, 0.0]))
    assert A[0, 2] == 0.0


def _fd_oracle(fn, z, out_dim, h):
    J = np.empty((out_dim, z.size))
    for i in range(z.size):
        dz = np.zeros_like(z)
        dz[i] = h
        J[:, i] = (fn(z + dz) - fn(z - dz)) / (2 * h)
    return J


@pytest.mark.parametrize(
    "make_model,x_dim,u_dim",
    [
        (dynamics.double_integrator_2d, 2, 2),
        (dynamics.unicycle, 3, 2),
        (dynamics.cartpole, 4, 1),
        (dynamics.quadrotor, 12, 4),
    ],
)
def test_jacobians_match_finite_differences(make_model, x_dim, u_dim):
    # Independent central differences with a step distinct from the
    # implementation's, 100+ random points per model.
    model = make_model()
    rng = np.random.default_rng(7)
    h = 1e-5
    for _ in range(100):
        x = rng.uniform(-1.0, 1.0, x_dim)
        u = rng.uniform(-1.0, 1.0, u_dim)
        A, B = dynamics.linearize(model, x, u)
        A_fd = _fd_oracle(lambda xx: dynamics.step(model, xx, u), x, x_dim, h)
        B_fd = _fd_oracle(lambda uu: dynamics.step(model, x, uu), u, x_dim, h)
        scale = max(1.0, np.abs(A).max())
        assert np.abs(A - A_fd).max() <= 1e-5 * scale
        assert np.abs(B - B_fd).max() <= 1e-5 * max(1.0, np.abs(B).max())


def test_rollout_empty_inputs_single_state():
    model = dynamics.double_integrator_2d()
    traj = dynamics.rollout(model, np.array([3.0, -1.0]), np.zeros((0, 2)))
    assert traj.horizon == 0
    np.testing.assert_array_equal(traj.states, np.array([[3.0, -1.0]]))


def test_rollout_linear_arithmetic():
    model = dynamics.double_integrator_2d()
    traj = dynamics.rollout(model, np.zeros(2), [np.array([1.0, 0.0])] * 2)
    np.testing.assert_array_equal(
        traj.states, np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    )


def test_rollout_transitions_revalidate_bit_equal():
    model = dynamics.unicycle()
    rng = np.random.default_rng(3)
    x0 = rng.standard_normal(3)
    inputs = rng.standard_normal((15, 2))
    traj = dynamics.rollout(model, x0, inputs)
    for t in range(traj.horizon):
        np.testing.assert_array_equal(
            traj.states[t + 1], dynamics.step(model, traj.states[t], traj.inputs[t])
        )


def test_noisy_rollout_seed_reproducibility():
    model = dynamics.double_integrator_2d()
    noise = dynamics.NoiseModel(0.1 * np.eye(2))
    inputs = np.zeros((10, 2))
    a = dynamics.rollout(model, np.zeros(2), inputs, noise=noise, seed=11)
    b = dynamics.rollout(model, np.zeros(2), inputs, noise=noise, seed=11)
    np.testing.assert_array_equal(a.states, b.states)
    c = dynamics.rollout(model, np.zeros(2), inputs, noise=noise, seed=12)
    assert np.any(c.states != a.states)


def test_noise_samples_standard_normal_statistics():
    noise = dynamics.NoiseModel(np.eye(3))
    rng = np.random.default_rng(5)
    w = noise.sample(rng, 20000)
    assert w.shape == (20000, 3)
    se = 1.0 / np.sqrt(w.shape[0])
    assert np.abs(w.mean(axis=0)).max() < 3 * se
    # Var estimator SE for a standard normal is sqrt(2/n).
    assert np.abs(w.var(axis=0) - 1.0).max() < 3 * np.sqrt(2.0 / w.shape[0])


def test_rollout_divergence_reports_timestep():
    model = dynamics.linear_model(np.array([[10.0]]), np.array([[0.0]]))
    with pytest.raises(DivergenceError) as err:
        dynamics.rollout(model, np.array([1.0]), np.zeros((10, 1)))
    # 10^t exceeds 1e6 first at t=7 (state index 7 after step 7).
    assert err.value.timestep == 7


def test_trajectory_length_invariant():
    with pytest.raises(ValueError):
        dynamics.Trajectory(states=np.zeros((3, 2)), inputs=np.zeros((3, 2)))


def test_cartpole_energy_drift_quadratic_in_dt():
    # One Euler step from a swinging state; drift per step is O(dt^2), so
    # halving dt should quarter it (within a factor of two).
    x = np.array([0.0, 2.0, 0.3, 0.5])
    drifts = []
    for dt in (0.02, 0.01):
        model = dynamics.cartpole(dt=dt)
        e0 = dynamics.cartpole_energy(model, x)
        e1 = dynamics.cartpole_energy(model, dynamics.step(model, x, np.zeros(1)))
        drifts.append(abs(e1 - e0))
    ratio = drifts[0] / drifts[1]
    assert 2.0 < ratio < 8.0


def test_quadrotor_hover_fixed_point():
    model = dynamics.quadrotor()
    x = np.zeros(12)
    out = dynamics.step(model, x, dynamics.hover_input(model))
    np.testing.assert_allclose(out, x, atol=1e-14)
