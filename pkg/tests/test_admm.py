"""Tests for the outer consensus loop.

Covers the three-update arithmetic, penalty adaptation with dual rescaling,
iteration accounting, convergence against a dense-QP oracle on convex
instances, constraint satisfaction at termination, the stochastic
certainty-equivalent policy, and exact reproducibility.
"""

import numpy as np
import pytest

from layered_ocp import experiments
from layered_ocp.admm import (
    AdmmConfig,
    AdmmState,
    LayeredProblem,
    _initial_reference,
    admm_solve,
    iteration_count,
    ocp_objective,
    residuals,
    simulate_policy,
    solve_stochastic,
    update_rho,
)
from layered_ocp.dynamics import (
    NoiseModel,
    Trajectory,
    double_integrator_2d,
    linear_model,
    step,
    unicycle,
)
from layered_ocp.errors import UnsupportedCostError
from layered_ocp.oracles import solve_ocp_qp
from layered_ocp.traj_opt import (
    InputBox,
    ReferenceCost,
    goal_reference_cost,
    target_tracking_cost,
)


def linear_circle_problem(horizon=20):
    return experiments.build_problem("linear-circle", horizon, np.zeros(2))


def linear_config(**overrides):
    return experiments.default_admm_config("linear-circle", **overrides)


# --- update_rho --------------------------------------------------------------

def test_update_rho_balanced_residuals_leave_rho_unchanged():
    assert update_rho(5.0, 1.0, 1.0) == (5.0, 1.0)
    # boundary: exactly mu * dual is not strict dominance
    assert update_rho(5.0, 10.0, 1.0) == (5.0, 1.0)


def test_update_rho_primal_dominance_doubles_and_halves_duals():
    new_rho, rescale = update_rho(3.0, 100.0, 1.0, mu=10.0, tau_incr=2.0, tau_decr=2.0)
    assert new_rho == 6.0
    assert rescale == 0.5


def test_update_rho_dual_dominance_halves():
    new_rho, rescale = update_rho(3.0, 1.0, 100.0, mu=10.0, tau_incr=2.0, tau_decr=2.0)
    assert new_rho == 1.5
    assert rescale == 2.0


def test_rescale_preserves_unscaled_duals_exactly():
    rng = np.random.default_rng(40)
    v = rng.normal(size=(7, 3))
    rho = 25.0
    for primal, dual in ((100.0, 1.0), (1.0, 100.0)):
        new_rho, rescale = update_rho(rho, primal, dual)
        np.testing.assert_array_equal(rho * v, new_rho * (v * rescale))


# --- iteration accounting ------------------------------------------------------

def test_iteration_count_examples():
    assert iteration_count([10, 4, 1]) == 18
    assert iteration_count([1] * 5) == 10
    assert iteration_count([]) == 0


# --- residuals -----------------------------------------------------------------

def test_residuals_semantics():
    states = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    traj = Trajectory(states=states, inputs=np.zeros((2, 1)))
    r = states.copy()
    st = AdmmState(reference=r, trajectory=traj, duals=np.zeros((3, 2)),
                   rho=2.0, outer=1)
    primal, dual = residuals(st, r)
    assert primal == 0.0 and dual == 0.0

    r2 = r + 0.1
    st2 = AdmmState(reference=r2, trajectory=traj, duals=np.zeros((3, 2)),
                    rho=2.0, outer=1)
    primal, dual = residuals(st2, r)
    assert primal == pytest.approx(np.linalg.norm((states - r2).ravel()))
    assert dual == pytest.approx(2.0 * np.linalg.norm((r2 - r).ravel()))

    C = np.array([[1.0, 0.0]])
    st3 = AdmmState(reference=states[:, :1], trajectory=traj,
                    duals=np.zeros((3, 1)), rho=1.0, outer=1, C=C)
    primal, dual = residuals(st3, states[:, :1])
    assert primal == 0.0 and dual == 0.0


# --- initialization --------------------------------------------------------------

def test_initial_reference_interpolates_output_to_target():
    targets = np.zeros((5, 2))
    targets[-1] = [4.0, -2.0]
    prob = LayeredProblem(
        model=double_integrator_2d(),
        cost=target_tracking_cost(targets),
        R_seq=0.001 * np.eye(2), horizon=4, xi=np.array([1.0, 0.0]),
    )
    r0 = _initial_reference(prob)
    expected = np.array([
        [1.0, 0.0], [1.75, -0.5], [2.5, -1.0], [3.25, -1.5], [4.0, -2.0],
    ])
    np.testing.assert_allclose(r0, expected, atol=1e-15)


# --- one-iteration fixed point -----------------------------------------------------

def test_equilibrium_start_converges_in_one_outer_iteration():
    xi = np.array([0.5, -0.25])
    model = linear_model(np.eye(2), np.eye(2))
    targets = np.broadcast_to(xi, (6, 2)).copy()
    prob = LayeredProblem(model=model, cost=target_tracking_cost(targets),
                          R_seq=0.01 * np.eye(2), horizon=5, xi=xi)
    state, policy, diag = admm_solve(prob, AdmmConfig(rho0=1.0))
    assert state.converged
    assert state.outer == 1
    assert diag["total_iterations"] == 2
    # the prox recovers the fixed point through a linear solve, so the
    # stationary iterates carry one rounding step of noise
    np.testing.assert_allclose(state.duals, np.zeros((6, 2)), atol=1e-12)
    np.testing.assert_allclose(state.trajectory.inputs, np.zeros((5, 2)), atol=1e-12)
    np.testing.assert_allclose(state.trajectory.states,
                               np.broadcast_to(xi, (6, 2)), atol=1e-12)


def test_first_dual_update_equals_consensus_gap():
    prob = linear_circle_problem(horizon=6)
    state, _, _ = admm_solve(prob, linear_config(max_outer=1))
    gap = state.output(state.trajectory.states) - state.reference
    np.testing.assert_array_equal(state.duals, gap)


# --- convex convergence vs dense QP -------------------------------------------------

def test_linear_circle_recovers_dense_qp_optimum():
    prob = linear_circle_problem(horizon=20)
    state, policy, diag = admm_solve(prob, linear_config())
    assert state.converged
    assert diag["primal_residuals"][-1] ** 2 <= 1e-2

    A = prob.model.params["A"]
    B = prob.model.params["B"]
    N = prob.horizon
    _, _, p_star = solve_ocp_qp(
        np.broadcast_to(A, (N, 2, 2)), np.broadcast_to(B, (N, 2, 2)),
        prob.R_seq, prob.cost.weights, prob.cost.targets, prob.xi,
    )
    assert abs(diag["objective"] - p_star) <= 1e-4 * abs(p_star)
    # dual iterate is Cauchy at termination: its last increment is the gap
    assert diag["primal_residuals"][-1] <= 1e-3
    tail = diag["primal_residuals"][-5:]
    assert all(b <= a * (1.0 + 1e-9) for a, b in zip(tail, tail[1:]))


def test_fixed_and_adaptive_penalty_reach_the_same_solution():
    prob = linear_circle_problem(horizon=12)
    _, _, diag_fixed = admm_solve(prob, linear_config(adapt_rho=False))
    _, _, diag_adapt = admm_solve(prob, linear_config())
    assert diag_fixed["converged"] and diag_adapt["converged"]
    rel = abs(diag_fixed["objective"] - diag_adapt["objective"])
    assert rel <= 1e-4 * max(abs(diag_fixed["objective"]), 1.0)


# --- dynamic feasibility and diagnostics ----------------------------------------------

def test_final_trajectory_revalidates_and_diagnostics_are_consistent():
    for prob, cfg in (
        (linear_circle_problem(horizon=10), linear_config()),
        (experiments.build_problem("unicycle", 10, np.array([0.3, -0.2, 0.1])),
         experiments.default_admm_config("unicycle")),
    ):
        state, policy, diag = admm_solve(prob, cfg)
        traj = state.trajectory
        for t in range(traj.horizon):
            np.testing.assert_array_equal(
                traj.states[t + 1], step(prob.model, traj.states[t], traj.inputs[t]))
        assert len(diag["primal_residuals"]) == state.outer
        assert len(diag["dual_residuals"]) == state.outer
        assert diag["total_iterations"] == iteration_count(diag["inner_counts"])
        assert diag["objective"] == ocp_objective(prob, traj)
        assert diag["rho_final"] > 0.0


def test_reproducibility_bit_identical_diagnostics():
    xi = np.array([0.3, -0.2, 0.1])
    runs = []
    for _ in range(2):
        prob = experiments.build_problem("unicycle", 10, xi)
        cfg = experiments.default_admm_config("unicycle")
        state, _, diag = admm_solve(prob, cfg)
        runs.append((state, diag))
    a, b = runs
    assert a[1]["primal_residuals"] == b[1]["primal_residuals"]
    assert a[1]["dual_residuals"] == b[1]["dual_residuals"]
    assert a[1]["objective"] == b[1]["objective"]
    np.testing.assert_array_equal(a[0].trajectory.states, b[0].trajectory.states)
    np.testing.assert_array_equal(a[0].reference, b[0].reference)


# --- constraint satisfaction at termination --------------------------------------------

def test_corridor_reference_feasible_and_states_within_tolerance():
    xi = np.array([0.4, 0.1, 0.2])
    prob = experiments.build_problem("unicycle-low-order-corridor", 20, xi)
    cfg = experiments.default_admm_config("unicycle-low-order-corridor")
    state, _, diag = admm_solve(prob, cfg)
    slack = np.sqrt(cfg.eps_primal)
    outputs = state.output(state.trajectory.states)
    for t, box in enumerate(prob.constraints):
        assert box.contains(state.reference[t])
        assert np.all(outputs[t] >= box.lower - slack)
        assert np.all(outputs[t] <= box.upper + slack)


def test_obstacle_reference_stays_out_of_keepout():
    xi = np.array([0.1, 0.2, -0.1])
    prob = experiments.build_problem("unicycle-obstacle", 20, xi)
    cfg = experiments.default_admm_config("unicycle-obstacle")
    state, _, _ = admm_solve(prob, cfg)
    for t, rect in enumerate(prob.constraints):
        assert rect.excludes(state.reference[t])


def test_input_bound_consensus_clips_actions():
    xi = np.array([0.2, 0.3, 0.0])
    prob = experiments.build_problem("unicycle-low-order-corridor-vel", 20, xi)
    cfg = experiments.default_admm_config("unicycle-low-order-corridor-vel")
    state, _, _ = admm_solve(prob, cfg)
    assert state.actions is not None
    assert np.all(np.abs(state.actions) <= 7.0)
    gap = np.linalg.norm(state.trajectory.inputs - state.actions)
    assert gap <= np.sqrt(cfg.eps_primal) + 1e-9


# --- policies ------------------------------------------------------------------------------

def test_noiseless_simulation_reproduces_plan_exactly():
    for prob, cfg in (
        (linear_circle_problem(horizon=10), linear_config()),
        (experiments.build_problem("unicycle", 10, np.array([0.3, -0.2, 0.1])),
         experiments.default_admm_config("unicycle")),
    ):
        _, policy, _ = admm_solve(prob, cfg)
        sim = simulate_policy(policy, prob.model)
        np.testing.assert_array_equal(sim.states, policy.plan.states)
        np.testing.assert_array_equal(sim.inputs, policy.plan.inputs)


def test_stochastic_policy_with_zero_noise_matches_deterministic():
    targets = experiments.circle_targets(12)
    prob = LayeredProblem(
        model=double_integrator_2d(), cost=target_tracking_cost(targets),
        R_seq=0.001 * np.eye(2), horizon=12, xi=np.zeros(2),
        noise=NoiseModel(H=np.zeros((2, 2))),
    )
    policy = solve_stochastic(prob, linear_config())
    assert policy.K_lqr is not None
    sim = simulate_policy(policy, prob.model, noise=prob.noise, seed=123)
    np.testing.assert_array_equal(sim.states, policy.plan.states)


def test_deterministic_component_independent_of_seed():
    prob = experiments.build_problem("linear-noise", 12, np.zeros(2))
    p1 = solve_stochastic(prob, linear_config(seed=1))
    p2 = solve_stochastic(prob, linear_config(seed=2))
    np.testing.assert_array_equal(p1.plan.states, p2.plan.states)
    np.testing.assert_array_equal(p1.K_lqr, p2.K_lqr)


def test_monte_carlo_mean_tracks_deterministic_plan():
    prob = experiments.build_problem("linear-noise", 20, np.zeros(2))
    policy = solve_stochastic(prob, linear_config())
    M = 10_000
    seeds = np.random.SeedSequence(101).spawn(M)
    acc = np.zeros_like(policy.plan.states)
    acc_sq = np.zeros_like(policy.plan.states)
    for s in seeds:
        sim = simulate_policy(policy, prob.model, noise=prob.noise, seed=s)
        acc += sim.states
        acc_sq += sim.states ** 2
    mean = acc / M
    var = np.maximum(acc_sq / M - mean ** 2, 0.0)
    bound = 3.0 * np.sqrt(var / M) + 1e-12
    np.testing.assert_array_less(np.abs(mean - policy.plan.states), bound + 1e-9)


def test_stochastic_requires_linear_dynamics():
    prob = experiments.build_problem("unicycle", 10, np.zeros(3))
    with pytest.raises(UnsupportedCostError):
        solve_stochastic(prob, experiments.default_admm_config("unicycle"))


# --- validation ----------------------------------------------------------------------------

def test_layered_problem_validation():
    model = double_integrator_2d()
    cost = goal_reference_cost(np.zeros(2), horizon=5)
    good = dict(model=model, cost=cost, R_seq=np.eye(2), horizon=5, xi=np.zeros(2))
    LayeredProblem(**good)
    with pytest.raises(ValueError):
        LayeredProblem(**{**good, "horizon": 0})
    with pytest.raises(ValueError):
        LayeredProblem(**{**good, "xi": np.zeros(3)})
    with pytest.raises(ValueError):
        LayeredProblem(**{**good, "C": np.eye(3)})
    with pytest.raises(ValueError):
        LayeredProblem(**{**good, "horizon": 4})
    with pytest.raises(ValueError):
        LayeredProblem(**{**good, "constraints": [None] * 3})
    with pytest.raises(ValueError):
        LayeredProblem(**{**good, "R_seq": np.eye(3)})


def test_admm_config_validation():
    with pytest.raises(ValueError):
        AdmmConfig(rho0=0.0)
    with pytest.raises(ValueError):
        AdmmConfig(mu=1.0)
    with pytest.raises(ValueError):
        AdmmConfig(eps_primal=0.0)
    with pytest.raises(ValueError):
        AdmmConfig(max_outer=0)
    with pytest.raises(ValueError):
        AdmmConfig(max_inner=0)


def test_ocp_objective_arithmetic():
    model = linear_model(np.eye(2), np.eye(2))
    targets = np.zeros((2, 2))
    prob = LayeredProblem(model=model, cost=target_tracking_cost(targets, weight=2.0),
                          R_seq=np.eye(2), horizon=1, xi=np.array([1.0, 0.0]))
    traj = Trajectory(states=np.array([[1.0, 0.0], [0.0, 0.0]]),
                      inputs=np.array([[3.0, 0.0]]))
    # 2*|x_0|^2 + 2*|x_1|^2 + |u_0|^2 = 2 + 0 + 9
    assert ocp_objective(prob, traj) == 11.0
