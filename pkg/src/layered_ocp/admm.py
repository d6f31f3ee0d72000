"""Outer consensus loop coupling trajectory generation and feedback control.

The optimal control problem is split by introducing a redundant reference
variable constrained to match (an output of) the state trajectory. Scaled
dual ascent on that constraint alternates between a proximal reference
update (planning layer), an exact or iterative tracking solve (feedback
layer), and a dual update, with an adaptive penalty that rebalances primal
and dual progress.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .dynamics import DynamicsModel, NoiseModel, Trajectory, rollout, step
from .errors import UnsupportedCostError
from .ilqr import IlqrResult, ilqr_solve, tracking_cost
from .tracking_lqr import TrackingProblem, lqr_gain, solve_tracking
from .traj_opt import Constraint, InputBox, ReferenceCost, prox_input, prox_reference


@dataclass(frozen=True)
class LayeredProblem:
    """Optimal control problem data for the layered solver.

    The reference cost acts on reference coordinates: full state when ``C``
    is None, else the output C x. ``input_bound`` switches on the redundant
    action variable with its own consensus constraint u = a.
    """

    model: DynamicsModel
    cost: ReferenceCost
    R_seq: np.ndarray
    horizon: int
    xi: np.ndarray
    constraints: Optional[Sequence[Constraint]] = None
    input_bound: Optional[InputBox] = None
    C: Optional[np.ndarray] = None
    noise: Optional[NoiseModel] = None

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be at least 1")
        n, m = self.model.state_dim, self.model.input_dim
        xi = np.asarray(self.xi, dtype=float)
        if xi.shape != (n,):
            raise ValueError(f"xi must have shape ({n},)")
        object.__setattr__(self, "xi", xi)
        R = np.asarray(self.R_seq, dtype=float)
        if R.ndim == 2:
            R = np.broadcast_to(R, (self.horizon, m, m)).copy()
        if R.shape != (self.horizon, m, m):
            raise ValueError(f"R_seq must have shape ({self.horizon}, {m}, {m})")
        object.__setattr__(self, "R_seq", R)
        q = n
        if self.C is not None:
            C = np.asarray(self.C, dtype=float)
            if C.ndim != 2 or C.shape[1] != n or C.shape[0] > n:
                raise ValueError(f"C must have shape (q, {n}) with q <= {n}")
            q = C.shape[0]
            object.__setattr__(self, "C", C)
        if self.cost.ref_dim != q:
            raise ValueError(f"cost dimension {self.cost.ref_dim} != reference dimension {q}")
        if self.cost.steps != self.horizon + 1:
            raise ValueError(f"cost must cover {self.horizon + 1} steps")
        if self.constraints is not None and len(self.constraints) != self.horizon + 1:
            raise ValueError(f"constraints must have {self.horizon + 1} entries")
        if self.input_bound is not None and not isinstance(self.input_bound, InputBox):
            object.__setattr__(self, "input_bound", InputBox(self.input_bound))

    @property
    def state_dim(self) -> int:
        return self.model.state_dim

    @property
    def input_dim(self) -> int:
        return self.model.input_dim

    @property
    def ref_dim(self) -> int:
        return self.cost.ref_dim

    @property
    def is_linear(self) -> bool:
        """True when the dynamics are the built-in linear model."""
        return "A" in self.model.params and "B" in self.model.params

    def output(self, states: np.ndarray) -> np.ndarray:
        """Map a state sequence to reference coordinates."""
        return states if self.C is None else states @ self.C.T


@dataclass(frozen=True)
class AdmmConfig:
    """Penalty schedule, stopping tolerances, and iteration caps.

    Stopping uses primal_residual^2 <= eps_primal and dual_residual <=
    eps_dual. ``max_inner`` caps the iLQR iterations of each nonlinear
    feedback-layer solve; linear solves are exact and count as one.
    """

    rho0: float = 25.0
    mu: float = 10.0
    tau_incr: float = 2.0
    tau_decr: float = 2.0
    eps_primal: float = 1e-2
    eps_dual: float = 0.1
    max_outer: int = 200
    max_inner: int = 10
    ilqr_tol: float = 1e-6
    adapt_rho: bool = True
    seed: Optional[int] = None

    def __post_init__(self):
        if self.rho0 <= 0.0:
            raise ValueError("rho0 must be positive")
        if self.mu <= 1.0 or self.tau_incr <= 1.0 or self.tau_decr <= 1.0:
            raise ValueError("mu and tau factors must exceed 1")
        if self.eps_primal <= 0.0 or self.eps_dual <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_inner < 1:
            raise ValueError("iteration caps must be at least 1")


@dataclass
class AdmmState:
    """Iterates and residual bookkeeping of one consensus solve."""

    reference: np.ndarray
    trajectory: Trajectory
    duals: np.ndarray
    rho: float
    outer: int
    C: Optional[np.ndarray] = None
    actions: Optional[np.ndarray] = None
    action_duals: Optional[np.ndarray] = None
    primal_history: list = field(default_factory=list)
    dual_history: list = field(default_factory=list)
    inner_counts: list = field(default_factory=list)
    converged: bool = False

    def output(self, states: np.ndarray) -> np.ndarray:
        return states if self.C is None else states @ self.C.T


@dataclass
class LayeredPolicy:
    """Plan plus feedback structure produced by the layered solver.

    ``K_fb``/``K_ff``/``nu`` come from the exact tracking solve on linear
    models (u = -K_fb e - K_ff mu - nu); ``local_gains`` are the iLQR
    feedback gains around the plan for nonlinear models; ``K_lqr`` is the
    certainty-equivalent noise-rejection gain when a stochastic solve
    produced the policy.
    """

    reference: np.ndarray
    plan: Trajectory
    K_fb: Optional[np.ndarray] = None
    K_ff: Optional[np.ndarray] = None
    nu: Optional[np.ndarray] = None
    local_gains: Optional[np.ndarray] = None
    K_lqr: Optional[np.ndarray] = None

    def deviation_gain(self, t: int) -> Optional[np.ndarray]:
        """Gain G_t such that u_t = u^d_t + G_t (x_t - x^d_t)."""
        if self.K_lqr is not None:
            return -self.K_lqr[t]
        if self.local_gains is not None:
            return self.local_gains[t]
        if self.K_fb is not None:
            return -self.K_fb[t]
        return None


def residuals(state: AdmmState, r_prev: np.ndarray) -> Tuple[float, float]:
    """Consensus residuals of the reference constraint.

    primal = ||C x - r||_2, dual = rho ||r - r_prev||_2 (the dual residual of
    this splitting: the r-update's optimality shift scaled by the penalty).
    """
    gap = state.output(state.trajectory.states) - state.reference
    primal = float(np.linalg.norm(gap.ravel()))
    dual = state.rho * float(np.linalg.norm((state.reference - r_prev).ravel()))
    return primal, dual


def update_rho(
    rho: float,
    primal_res: float,
    dual_res: float,
    mu: float = 10.0,
    tau_incr: float = 2.0,
    tau_decr: float = 2.0,
) -> Tuple[float, float]:
    """Residual-balancing penalty update.

    Grows rho when the primal residual dominates, shrinks it when the dual
    residual dominates. Returns (new_rho, rescale) where rescale = rho/new_rho
    must multiply every scaled dual to keep the unscaled duals unchanged.
    """
    if primal_res > mu * dual_res:
        new_rho = tau_incr * rho
    elif dual_res > mu * primal_res:
        new_rho = rho / tau_decr
    else:
        new_rho = rho
    return new_rho, rho / new_rho


def iteration_count(inner_counts: Sequence[int]) -> int:
    """Total solver effort: one reference update plus the inner iterations
    of the feedback solve, summed over outer iterations."""
    return sum(1 + int(i) for i in inner_counts)


def ocp_objective(prob: LayeredProblem, traj: Trajectory) -> float:
    """Original objective: reference cost of the output plus input cost."""
    total = prob.cost.objective(prob.output(traj.states))
    for t in range(prob.horizon):
        u = traj.inputs[t]
        total += float(u @ prob.R_seq[t] @ u)
    return total


def _initial_reference(prob: LayeredProblem) -> np.ndarray:
    """Straight-line interpolation from the initial output to the final target."""
    y0 = prob.output(prob.xi[None, :])[0]
    target = prob.cost.targets[-1]
    alphas = np.linspace(0.0, 1.0, prob.horizon + 1)[:, None]
    return (1.0 - alphas) * y0 + alphas * target


def _linear_matrices(prob: LayeredProblem) -> Tuple[np.ndarray, np.ndarray]:
    A = np.asarray(prob.model.params["A"], dtype=float)
    B = np.asarray(prob.model.params["B"], dtype=float)
    N = prob.horizon
    return (
        np.broadcast_to(A, (N,) + A.shape).copy(),
        np.broadcast_to(B, (N,) + B.shape).copy(),
    )


def admm_solve(prob: LayeredProblem, cfg: AdmmConfig) -> Tuple[AdmmState, LayeredPolicy, dict]:
    """Run the layered consensus loop to convergence or the iteration cap.

    Returns the final state, the policy (plan plus feedback structure from
    the last feedback-layer solve), and a diagnostics dict with residual
    traces and iteration accounting.
    """
    N, m, q = prob.horizon, prob.input_dim, prob.ref_dim
    input_constrained = prob.input_bound is not None

    r = _initial_reference(prob)
    traj = rollout(prob.model, prob.xi, np.zeros((N, m)))
    v = np.zeros((N + 1, q))
    a = np.zeros((N, m)) if input_constrained else None
    v_a = np.zeros((N, m)) if input_constrained else None
    rho = cfg.rho0

    state = AdmmState(
        reference=r, trajectory=traj, duals=v, rho=rho, outer=0,
        C=prob.C, actions=a, action_duals=v_a,
    )
    if prob.is_linear:
        A_seq, B_seq = _linear_matrices(prob)
    last_tracking = None
    last_ilqr: Optional[IlqrResult] = None

    for k in range(1, cfg.max_outer + 1):
        r_prev = state.reference
        a_prev = state.actions
        anchor = state.output(state.trajectory.states) + state.duals
        r_new = prox_reference(prob.cost, anchor, state.rho, prob.constraints)
        a_new = None
        if input_constrained:
            a_new = prox_input(state.trajectory.inputs + state.action_duals, prob.input_bound)

        if prob.is_linear:
            tp = TrackingProblem(
                A_seq=A_seq, B_seq=B_seq, R_seq=prob.R_seq, rho=state.rho,
                references=r_new, duals=state.duals, xi=prob.xi, C=prob.C,
                action_targets=a_new, action_duals=state.action_duals,
            )
            lqr_traj, last_tracking = solve_tracking(tp)
            traj = rollout(prob.model, prob.xi, lqr_traj.inputs)
            inner = 1
        else:
            cost_k = tracking_cost(
                r_new, state.duals, state.rho, prob.R_seq, prob.C,
                action_targets=a_new, action_duals=state.action_duals,
            )
            last_ilqr = ilqr_solve(
                prob.model, cost_k, prob.xi, state.trajectory.inputs,
                max_iters=cfg.max_inner, tol=cfg.ilqr_tol,
            )
            traj = last_ilqr.trajectory
            inner = last_ilqr.iterations_used

        gap = prob.output(traj.states) - r_new
        state.reference = r_new
        state.trajectory = traj
        state.duals = state.duals + gap
        state.outer = k
        primal_sq = float(np.sum(gap * gap))
        dual_vec_sq = float(np.sum((r_new - r_prev) ** 2))
        if input_constrained:
            u_gap = traj.inputs - a_new
            state.actions = a_new
            state.action_duals = state.action_duals + u_gap
            primal_sq += float(np.sum(u_gap * u_gap))
            dual_vec_sq += float(np.sum((a_new - a_prev) ** 2))
        primal = np.sqrt(primal_sq)
        dual = state.rho * np.sqrt(dual_vec_sq)
        state.primal_history.append(primal)
        state.dual_history.append(dual)
        state.inner_counts.append(inner)

        if primal_sq <= cfg.eps_primal and dual <= cfg.eps_dual:
            state.converged = True
            break

        if cfg.adapt_rho:
            new_rho, rescale = update_rho(
                state.rho, primal, dual, cfg.mu, cfg.tau_incr, cfg.tau_decr
            )
            if new_rho != state.rho:
                state.duals = state.duals * rescale
                if input_constrained:
                    state.action_duals = state.action_duals * rescale
                state.rho = new_rho

    if prob.is_linear and last_tracking is not None:
        policy = LayeredPolicy(
            reference=state.reference, plan=state.trajectory,
            K_fb=last_tracking.K_fb, K_ff=last_tracking.K_ff, nu=last_tracking.nu,
        )
    else:
        policy = LayeredPolicy(
            reference=state.reference, plan=state.trajectory,
            local_gains=None if last_ilqr is None else last_ilqr.gains,
        )

    diagnostics = {
        "outer_iterations": state.outer,
        "total_iterations": iteration_count(state.inner_counts),
        "converged": state.converged,
        "primal_residuals": list(state.primal_history),
        "dual_residuals": list(state.dual_history),
        "inner_counts": list(state.inner_counts),
        "rho_final": state.rho,
        "objective": ocp_objective(prob, state.trajectory),
    }
    return state, policy, diagnostics


def solve_stochastic(prob: LayeredProblem, cfg: AdmmConfig) -> LayeredPolicy:
    """Certainty-equivalent policy for linear dynamics with additive noise.

    The plan comes from the deterministic solve; deviations from the plan
    are handled by a standard finite-horizon LQR gain on the quadratic state
    weight, independent of the noise realization.
    """
    if not isinstance(prob.cost, ReferenceCost):
        raise UnsupportedCostError("stochastic decomposition requires a quadratic reference cost")
    if not prob.is_linear:
        raise UnsupportedCostError("stochastic decomposition requires linear dynamics")
    _, policy, _ = admm_solve(prob, cfg)
    A = np.asarray(prob.model.params["A"], dtype=float)
    B = np.asarray(prob.model.params["B"], dtype=float)
    if prob.C is None:
        C_x = prob.cost.weights
    else:
        C_x = np.stack([prob.C.T @ W @ prob.C for W in prob.cost.weights])
    policy.K_lqr = lqr_gain(A, B, C_x, prob.R_seq, prob.horizon)
    return policy


def simulate_policy(
    policy: LayeredPolicy,
    model: DynamicsModel,
    x0: Optional[np.ndarray] = None,
    noise: Optional[NoiseModel] = None,
    seed: Optional[int] = None,
) -> Trajectory:
    """Closed-loop rollout of a layered policy.

    Without noise and starting on the plan, the corrections vanish and the
    plan is reproduced exactly.
    """
    plan = policy.plan
    N = plan.horizon
    states = np.zeros_like(plan.states)
    inputs = np.zeros_like(plan.inputs)
    states[0] = plan.states[0] if x0 is None else np.asarray(x0, dtype=float)
    w = None
    if noise is not None:
        rng = np.random.default_rng(seed)
        w = noise.sample(rng, N)
    for t in range(N):
        u = plan.inputs[t]
        G = policy.deviation_gain(t)
        if G is not None:
            u = u + G @ (states[t] - plan.states[t])
        inputs[t] = u
        states[t + 1] = step(model, states[t], u)
        if w is not None:
            states[t + 1] = states[t + 1] + noise.H @ w[t]
    return Trajectory(states=states, inputs=inputs)
