"""Iterative LQR for nonlinear tracking subproblems and as a baseline solver.

Gauss-Newton variant: costs are expanded to second order, dynamics to first
order (no second-order dynamics tensors). Levenberg-style regularization on
the input Hessian block plus a backtracking line search give monotone cost
decrease on accepted iterates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from .dynamics import DIVERGENCE_LIMIT, DynamicsModel, Trajectory, linearize, step
from .errors import DivergenceError

REG_INIT = 1e-6
REG_MAX = 1e10
LINE_SEARCH_STEPS = tuple(0.5 ** i for i in range(11))


@dataclass(frozen=True)
class IlqrCost:
    """Differentiable stage and terminal costs for an iLQR solve.

    ``stage(x, u, t)`` runs for t = 0..N-1, ``terminal(x)`` once. Gradient
    and Hessian evaluators must be consistent with the scalar functions
    (checked against finite differences in the tests).
    """

    stage: Callable[[np.ndarray, np.ndarray, int], float]
    stage_grad: Callable[[np.ndarray, np.ndarray, int], Tuple[np.ndarray, np.ndarray]]
    stage_hess: Callable[[np.ndarray, np.ndarray, int], Tuple[np.ndarray, np.ndarray, np.ndarray]]
    terminal: Callable[[np.ndarray], float]
    terminal_grad: Callable[[np.ndarray], np.ndarray]
    terminal_hess: Callable[[np.ndarray], np.ndarray]

    def total(self, traj: Trajectory) -> float:
        """Cost of a full trajectory."""
        J = sum(
            float(self.stage(traj.states[t], traj.inputs[t], t))
            for t in range(traj.horizon)
        )
        return J + float(self.terminal(traj.states[-1]))


def tracking_cost(
    references: np.ndarray,
    duals: np.ndarray,
    rho: float,
    R_seq: np.ndarray,
    C: Optional[np.ndarray] = None,
    action_targets: Optional[np.ndarray] = None,
    action_duals: Optional[np.ndarray] = None,
) -> IlqrCost:
    """Tracking-layer cost (rho/2)||C x - r_t + v_t||^2 + u' R_t u.

    When ``action_targets`` is given the stage cost gains the proximal term
    (rho/2)||u - a_t + va_t||^2. Terminal stage carries the tracking term
    only. This is the objective the feedback layer minimizes for nonlinear
    models inside the outer consensus loop.
    """
    r = np.asarray(references, dtype=float)
    v = np.asarray(duals, dtype=float)
    R_seq = np.asarray(R_seq, dtype=float)
    if R_seq.ndim == 2:
        R_seq = np.broadcast_to(R_seq, (r.shape[0] - 1,) + R_seq.shape)
    b = None
    if action_targets is not None:
        b = np.asarray(action_targets, dtype=float) - np.asarray(action_duals, dtype=float)

    def x_gap(x: np.ndarray, t: int) -> np.ndarray:
        y = x if C is None else C @ x
        return y - r[t] + v[t]

    def stage(x, u, t):
        g = x_gap(x, t)
        J = 0.5 * rho * g @ g + u @ R_seq[t] @ u
        if b is not None:
            d = u - b[t]
            J += 0.5 * rho * d @ d
        return float(J)

    def stage_grad(x, u, t):
        g = x_gap(x, t)
        l_x = rho * g if C is None else rho * C.T @ g
        l_u = 2.0 * R_seq[t] @ u
        if b is not None:
            l_u = l_u + rho * (u - b[t])
        return l_x, l_u

    def stage_hess(x, u, t):
        n, m = x.shape[0], u.shape[0]
        l_xx = rho * np.eye(n) if C is None else rho * C.T @ C
        l_uu = 2.0 * R_seq[t]
        if b is not None:
            l_uu = l_uu + rho * np.eye(m)
        return l_xx, l_uu, np.zeros((m, n))

    def terminal(x):
        g = x_gap(x, r.shape[0] - 1)
        return float(0.5 * rho * g @ g)

    def terminal_grad(x):
        g = x_gap(x, r.shape[0] - 1)
        return rho * g if C is None else rho * C.T @ g

    def terminal_hess(x):
        return rho * np.eye(x.shape[0]) if C is None else rho * C.T @ C

    return IlqrCost(stage, stage_grad, stage_hess, terminal, terminal_grad, terminal_hess)


def goal_cost(
    goal: np.ndarray,
    stage_weight: np.ndarray,
    terminal_weight: np.ndarray,
    input_weight: np.ndarray,
) -> IlqrCost:
    """Quadratic drive-to-goal cost (x-g)'Q(x-g) + u'Ru with terminal Q_N.

    The baseline solver uses this with the same weights as the layered
    runs so comparisons are like-for-like.
    """
    g = np.asarray(goal, dtype=float)
    n = g.shape[0]
    Q = np.asarray(stage_weight, dtype=float) * np.eye(n) if np.isscalar(stage_weight) else np.asarray(stage_weight, dtype=float)
    QN = np.asarray(terminal_weight, dtype=float) * np.eye(n) if np.isscalar(terminal_weight) else np.asarray(terminal_weight, dtype=float)
    R = np.asarray(input_weight, dtype=float)

    def stage(x, u, t):
        d = x - g
        Ru = R * np.eye(u.shape[0]) if R.ndim == 0 else R
        return float(d @ Q @ d + u @ Ru @ u)

    def stage_grad(x, u, t):
        Ru = R * np.eye(u.shape[0]) if R.ndim == 0 else R
        return 2.0 * Q @ (x - g), 2.0 * Ru @ u

    def stage_hess(x, u, t):
        m = u.shape[0]
        Ru = R * np.eye(m) if R.ndim == 0 else R
        return 2.0 * Q, 2.0 * Ru, np.zeros((m, n))

    def terminal(x):
        d = x - g
        return float(d @ QN @ d)

    return IlqrCost(
        stage, stage_grad, stage_hess,
        terminal, lambda x: 2.0 * QN @ (x - g), lambda x: 2.0 * QN,
    )


@dataclass
class IlqrResult:
    """Outcome of an iLQR solve: trajectory, local gains, and bookkeeping."""

    trajectory: Trajectory
    gains: np.ndarray
    feedforward: np.ndarray
    iterations_used: int
    converged: bool
    cost: float


def _forward_pass(
    model: DynamicsModel,
    traj: Trajectory,
    k_seq: np.ndarray,
    K_seq: np.ndarray,
    alpha: float,
) -> Trajectory:
    """Roll out the locally-corrected policy around the nominal trajectory."""
    N = traj.horizon
    states = np.zeros_like(traj.states)
    inputs = np.zeros_like(traj.inputs)
    states[0] = traj.states[0]
    for t in range(N):
        inputs[t] = traj.inputs[t] + alpha * k_seq[t] + K_seq[t] @ (states[t] - traj.states[t])
        states[t + 1] = step(model, states[t], inputs[t])
        if np.any(np.abs(states[t + 1]) > DIVERGENCE_LIMIT):
            raise DivergenceError(t + 1)
    return Trajectory(states=states, inputs=inputs)


def _backward_pass(cost: IlqrCost, traj: Trajectory, A_seq, B_seq, reg: float):
    """LQ backward pass; raises LinAlgError if any Q_uu block is not PD."""
    N, n, m = traj.horizon, traj.state_dim, traj.input_dim
    K_seq = np.zeros((N, m, n))
    k_seq = np.zeros((N, m))
    dV1 = 0.0
    dV2 = 0.0

    V_x = cost.terminal_grad(traj.states[-1])
    V_xx = cost.terminal_hess(traj.states[-1])
    for t in range(N - 1, -1, -1):
        A, B = A_seq[t], B_seq[t]
        l_x, l_u = cost.stage_grad(traj.states[t], traj.inputs[t], t)
        l_xx, l_uu, l_ux = cost.stage_hess(traj.states[t], traj.inputs[t], t)
        Q_x = l_x + A.T @ V_x
        Q_u = l_u + B.T @ V_x
        Q_xx = l_xx + A.T @ V_xx @ A
        Q_ux = l_ux + B.T @ V_xx @ A
        Q_uu = l_uu + B.T @ V_xx @ B + reg * np.eye(m)
        Q_uu = 0.5 * (Q_uu + Q_uu.T)
        chol = np.linalg.cholesky(Q_uu)
        k_seq[t] = -np.linalg.solve(chol.T, np.linalg.solve(chol, Q_u))
        K_seq[t] = -np.linalg.solve(chol.T, np.linalg.solve(chol, Q_ux))
        dV1 += float(k_seq[t] @ Q_u)
        dV2 += float(k_seq[t] @ Q_uu @ k_seq[t])
        V_x = Q_x + K_seq[t].T @ Q_uu @ k_seq[t] + K_seq[t].T @ Q_u + Q_ux.T @ k_seq[t]
        V_xx = Q_xx + K_seq[t].T @ Q_uu @ K_seq[t] + K_seq[t].T @ Q_ux + Q_ux.T @ K_seq[t]
        V_xx = 0.5 * (V_xx + V_xx.T)
    return K_seq, k_seq, dV1, dV2


def ilqr_solve(
    model: DynamicsModel,
    cost: IlqrCost,
    x0: np.ndarray,
    u_init: np.ndarray,
    max_iters: int,
    tol: float = 1e-6,
) -> IlqrResult:
    """Minimize an IlqrCost over dynamically feasible trajectories.

    Accepted iterates never increase the cost. Convergence is declared when
    the relative cost decrease (or the model-predicted decrease) drops below
    ``tol``. A line-search failure at maximum regularization returns the best
    trajectory found with ``converged=False``.

    Raises:
        DivergenceError: if the initial rollout leaves the guard region.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    u_init = np.asarray(u_init, dtype=float)
    N = u_init.shape[0]
    states = np.zeros((N + 1, model.state_dim))
    states[0] = np.asarray(x0, dtype=float)
    for t in range(N):
        states[t + 1] = step(model, states[t], u_init[t])
        if np.any(np.abs(states[t + 1]) > DIVERGENCE_LIMIT):
            raise DivergenceError(t + 1)
    traj = Trajectory(states=states, inputs=u_init.copy())
    J = cost.total(traj)

    reg = REG_INIT
    converged = False
    iterations = 0
    n, m = model.state_dim, model.input_dim
    K_seq = np.zeros((N, m, n))
    k_seq = np.zeros((N, m))

    while iterations < max_iters:
        iterations += 1
        A_seq = np.zeros((N, n, n))
        B_seq = np.zeros((N, n, m))
        for t in range(N):
            A_seq[t], B_seq[t] = linearize(model, traj.states[t], traj.inputs[t])

        while True:
            try:
                K_seq, k_seq, dV1, dV2 = _backward_pass(cost, traj, A_seq, B_seq, reg)
                break
            except np.linalg.LinAlgError:
                reg *= 10.0
                if reg > REG_MAX:
                    return IlqrResult(traj, K_seq, k_seq, iterations, False, J)

        # Model-predicted decrease at full step; near zero means the current
        # trajectory is already a stationary point of the LQ approximation.
        expected = -(dV1 + 0.5 * dV2)
        if expected < tol * max(abs(J), 1.0):
            converged = True
            break

        accepted = False
        for alpha in LINE_SEARCH_STEPS:
            try:
                candidate = _forward_pass(model, traj, k_seq, K_seq, alpha)
            except DivergenceError:
                continue
            J_new = cost.total(candidate)
            if np.isfinite(J_new) and J_new < J:
                rel = (J - J_new) / max(abs(J), 1e-12)
                traj, J = candidate, J_new
                reg = max(reg / 10.0, REG_INIT)
                accepted = True
                if rel < tol:
                    converged = True
                break
        if not accepted:
            reg *= 10.0
            if reg > REG_MAX:
                break
        if converged:
            break

    return IlqrResult(traj, K_seq, k_seq, iterations, converged, J)
