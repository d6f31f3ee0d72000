"""Dense stacked-QP oracles for equality-constrained optimal control.

These solve the same subproblems as the structured solvers but through a
completely different route: stack every state and input into one vector,
assemble the quadratic objective and the dynamics as linear equality
constraints, and solve the KKT system directly. Used as ground truth by the
test suite and by ``layered-ocp verify``.
"""

from __future__ import annotations

from typing import Optional

import numpy as np


def solve_equality_qp(H: np.ndarray, g: np.ndarray, E: np.ndarray, d: np.ndarray):
    """Minimize (1/2) w'Hw + g'w subject to Ew = d via the KKT linear system.

    Requires H positive definite on the nullspace of E and E full row rank.

    Returns:
        (w, objective_without_constant)
    """
    n_w, n_c = H.shape[0], E.shape[0]
    kkt = np.zeros((n_w + n_c, n_w + n_c))
    kkt[:n_w, :n_w] = H
    kkt[:n_w, n_w:] = E.T
    kkt[n_w:, :n_w] = E
    rhs = np.concatenate([-g, d])
    sol = np.linalg.solve(kkt, rhs)
    w = sol[:n_w]
    return w, float(0.5 * w @ H @ w + g @ w)


def _stack_dynamics(A_seq: np.ndarray, B_seq: np.ndarray, xi: np.ndarray):
    """Equality constraints for x_0 = xi and x_{t+1} = A_t x_t + B_t u_t."""
    N, n, m = A_seq.shape[0], A_seq.shape[1], B_seq.shape[2]
    n_x, n_u = n * (N + 1), m * N
    E = np.zeros((n * (N + 1), n_x + n_u))
    d = np.zeros(n * (N + 1))
    E[:n, :n] = np.eye(n)
    d[:n] = xi
    for t in range(N):
        row = n * (t + 1)
        E[row:row + n, n * (t + 1):n * (t + 2)] = np.eye(n)
        E[row:row + n, n * t:n * (t + 1)] = -A_seq[t]
        E[row:row + n, n_x + m * t:n_x + m * (t + 1)] = -B_seq[t]
    return E, d


def solve_tracking_qp(
    A_seq: np.ndarray,
    B_seq: np.ndarray,
    R_seq: np.ndarray,
    rho: float,
    references: np.ndarray,
    duals: np.ndarray,
    xi: np.ndarray,
    C: Optional[np.ndarray] = None,
    action_targets: Optional[np.ndarray] = None,
    action_duals: Optional[np.ndarray] = None,
):
    """Exact solution of the feedback-layer tracking subproblem.

    Objective, over x_0..x_N and u_0..u_{N-1} subject to the dynamics:

        sum_t (rho/2)||C x_t - r_t||^2 + rho (C x_t - r_t)' v_t
        + sum_{t<N} u_t' R_t u_t  [+ (rho/2)||u_t - a_t + va_t||^2]

    Returns:
        (states (N+1, n), inputs (N, m), objective)
    """
    A_seq = np.asarray(A_seq, dtype=float)
    B_seq = np.asarray(B_seq, dtype=float)
    R_seq = np.asarray(R_seq, dtype=float)
    N, n, m = A_seq.shape[0], A_seq.shape[1], B_seq.shape[2]
    C = np.eye(n) if C is None else np.asarray(C, dtype=float)
    r = np.asarray(references, dtype=float)
    v = np.asarray(duals, dtype=float)

    n_x, n_u = n * (N + 1), m * N
    H = np.zeros((n_x + n_u, n_x + n_u))
    g = np.zeros(n_x + n_u)
    const = 0.0

    CtC = C.T @ C
    for t in range(N + 1):
        sl = slice(n * t, n * (t + 1))
        H[sl, sl] += rho * CtC
        g[sl] += rho * C.T @ (v[t] - r[t])
        const += 0.5 * rho * r[t] @ r[t] - rho * v[t] @ r[t]

    for t in range(N):
        sl = slice(n_x + m * t, n_x + m * (t + 1))
        H[sl, sl] += 2.0 * R_seq[t]
        if action_targets is not None:
            b = action_targets[t] - (action_duals[t] if action_duals is not None else 0.0)
            H[sl, sl] += rho * np.eye(m)
            g[sl] += -rho * b
            const += 0.5 * rho * b @ b

    E, d = _stack_dynamics(A_seq, B_seq, np.asarray(xi, dtype=float))
    w, obj = solve_equality_qp(H, g, E, d)
    states = w[:n_x].reshape(N + 1, n)
    inputs = w[n_x:].reshape(N, m)
    return states, inputs, obj + const


def solve_ocp_qp(
    A_seq: np.ndarray,
    B_seq: np.ndarray,
    R_seq: np.ndarray,
    Q_seq: np.ndarray,
    targets: np.ndarray,
    xi: np.ndarray,
    C: Optional[np.ndarray] = None,
):
    """Exact solution of the original convex OCP with quadratic reference cost.

    Objective, over x and u subject to the dynamics:

        sum_{t=0}^{N} (C x_t - s_t)' Q_t (C x_t - s_t) + sum_{t<N} u_t' R_t u_t

    This is the ground-truth optimum that the ADMM iteration should approach
    on linear-convex instances (no state constraints).

    Returns:
        (states, inputs, objective)
    """
    A_seq = np.asarray(A_seq, dtype=float)
    B_seq = np.asarray(B_seq, dtype=float)
    R_seq = np.asarray(R_seq, dtype=float)
    Q_seq = np.asarray(Q_seq, dtype=float)
    s = np.asarray(targets, dtype=float)
    N, n, m = A_seq.shape[0], A_seq.shape[1], B_seq.shape[2]
    C = np.eye(n) if C is None else np.asarray(C, dtype=float)

    n_x, n_u = n * (N + 1), m * N
    H = np.zeros((n_x + n_u, n_x + n_u))
    g = np.zeros(n_x + n_u)
    const = 0.0

    for t in range(N + 1):
        sl = slice(n * t, n * (t + 1))
        Q = Q_seq[t]
        H[sl, sl] += 2.0 * C.T @ Q @ C
        g[sl] += -2.0 * C.T @ Q @ s[t]
        const += s[t] @ Q @ s[t]

    for t in range(N):
        sl = slice(n_x + m * t, n_x + m * (t + 1))
        H[sl, sl] += 2.0 * R_seq[t]

    E, d = _stack_dynamics(A_seq, B_seq, np.asarray(xi, dtype=float))
    w, obj = solve_equality_qp(H, g, E, d)
    states = w[:n_x].reshape(N + 1, n)
    inputs = w[n_x:].reshape(N, m)
    return states, inputs, obj + const
