"""Exact tracking controller for the feedback layer.

The feedback-layer subproblem penalizes deviation of the (output of the)
state trajectory from a fixed reference plus a linear dual term, and is an
LQR instance once the reference tail is folded into an augmented state

    z_t = (e_t, mu_t),   e_t = x_t - Cplus r_t,   mu_t = (r_t, ..., r_N, 0, ..)

where Cplus lifts a reference into state space (identity when the reference
lives in full state space). The reference tail shifts deterministically, so
a single Riccati recursion over the augmented system yields both the
feedback gain on the tracking error and the feedforward gain on the
remaining reference window.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .dynamics import Trajectory

SYM_TOL = 1e-8


def _as_sequence(M: np.ndarray, count: int) -> np.ndarray:
    """Broadcast a single matrix to a length-``count`` stack if needed."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 2:
        return np.broadcast_to(M, (count,) + M.shape).copy()
    if M.shape[0] != count:
        raise ValueError(f"expected {count} matrices, got {M.shape[0]}")
    return M


@dataclass(frozen=True)
class TrackingProblem:
    """Feedback-layer subproblem data.

    Minimizes, over trajectories of the linear(ized) dynamics from ``xi``:

        sum_{t=0}^{N} (rho/2)||C x_t - r_t||^2 + rho (C x_t - r_t)' v_t
        + sum_{t=0}^{N-1} u_t' R_t u_t  [+ (rho/2)||u_t - a_t + va_t||^2]

    ``C`` maps states to reference coordinates; None means the reference is a
    full state trajectory. The bracketed proximal term is active only when
    ``action_targets`` is set (input-constrained problems).
    """

    A_seq: np.ndarray
    B_seq: np.ndarray
    R_seq: np.ndarray
    rho: float
    references: np.ndarray
    duals: np.ndarray
    xi: np.ndarray
    C: Optional[np.ndarray] = None
    action_targets: Optional[np.ndarray] = None
    action_duals: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.asarray(self.A_seq, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError("A_seq must have shape (N, n, n)")
        N, n = A.shape[0], A.shape[1]
        B = np.asarray(self.B_seq, dtype=float)
        if B.shape[:2] != (N, n):
            raise ValueError("B_seq must have shape (N, n, m)")
        m = B.shape[2]
        object.__setattr__(self, "A_seq", A)
        object.__setattr__(self, "B_seq", B)
        R = _as_sequence(self.R_seq, N)
        if R.shape != (N, m, m):
            raise ValueError("R_seq must have shape (N, m, m)")
        for t in range(N):
            if not np.allclose(R[t], R[t].T, atol=SYM_TOL):
                raise ValueError(f"R_seq[{t}] is not symmetric")
            if np.linalg.eigvalsh(R[t])[0] <= 0.0:
                raise ValueError(f"R_seq[{t}] is not positive definite")
        object.__setattr__(self, "R_seq", R)
        if not self.rho > 0.0:
            raise ValueError("rho must be positive")
        C = self.C
        q = n
        if C is not None:
            C = np.asarray(C, dtype=float)
            if C.ndim != 2 or C.shape[1] != n:
                raise ValueError("C must have shape (q, n)")
            q = C.shape[0]
            if np.linalg.matrix_rank(C) < q:
                raise ValueError("C must have full row rank")
            object.__setattr__(self, "C", C)
        r = np.asarray(self.references, dtype=float)
        v = np.asarray(self.duals, dtype=float)
        if r.shape != (N + 1, q):
            raise ValueError(f"references must have shape ({N + 1}, {q})")
        if v.shape != (N + 1, q):
            raise ValueError(f"duals must have shape ({N + 1}, {q})")
        object.__setattr__(self, "references", r)
        object.__setattr__(self, "duals", v)
        xi = np.asarray(self.xi, dtype=float)
        if xi.shape != (n,):
            raise ValueError(f"xi must have shape ({n},)")
        object.__setattr__(self, "xi", xi)
        if (self.action_targets is None) != (self.action_duals is None):
            raise ValueError("action_targets and action_duals must be set together")
        if self.action_targets is not None:
            a = np.asarray(self.action_targets, dtype=float)
            va = np.asarray(self.action_duals, dtype=float)
            if a.shape != (N, m) or va.shape != (N, m):
                raise ValueError(f"action data must have shape ({N}, {m})")
            object.__setattr__(self, "action_targets", a)
            object.__setattr__(self, "action_duals", va)

    @property
    def horizon(self) -> int:
        return self.A_seq.shape[0]

    @property
    def state_dim(self) -> int:
        return self.A_seq.shape[1]

    @property
    def input_dim(self) -> int:
        return self.B_seq.shape[2]

    @property
    def ref_dim(self) -> int:
        return self.state_dim if self.C is None else self.C.shape[0]


@dataclass(frozen=True)
class AugmentedSystem:
    """Augmented dynamics and stage cost for the tracking problem.

    State z = (e, mu) with e the lifted tracking error and mu the stacked
    reference window. Selectors satisfy F F' = I, G G' = I, F G' = 0 and
    F'F + G'G = I, so gains over z split exactly into error-feedback and
    reference-feedforward parts.
    """

    A_bar: np.ndarray
    B_bar: np.ndarray
    Q_bar: np.ndarray
    q_lin: np.ndarray
    R_eff: np.ndarray
    s_lin: np.ndarray
    stage_const: np.ndarray
    F: np.ndarray
    G: np.ndarray
    z0: np.ndarray
    lift: np.ndarray

    @property
    def horizon(self) -> int:
        return self.A_bar.shape[0]

    @property
    def aug_dim(self) -> int:
        return self.A_bar.shape[1]


def build_augmented(prob: TrackingProblem) -> AugmentedSystem:
    """Fold the reference window into the state and expand the stage cost."""
    N, n, m, q = prob.horizon, prob.state_dim, prob.input_dim, prob.ref_dim
    C = np.eye(n) if prob.C is None else prob.C
    lift = np.linalg.pinv(C)
    nz = n + q * (N + 1)

    # mu_{t+1} = S mu_t drops the leading reference and shifts the rest up.
    S = np.zeros((q * (N + 1), q * (N + 1)))
    for i in range(N):
        S[q * i:q * (i + 1), q * (i + 1):q * (i + 2)] = np.eye(q)
    E0 = np.zeros((q, q * (N + 1)))
    E0[:, :q] = np.eye(q)
    E1 = np.zeros((q, q * (N + 1)))
    E1[:, q:2 * q] = np.eye(q)

    F = np.zeros((n, nz))
    F[:, :n] = np.eye(n)
    G = np.zeros((q * (N + 1), nz))
    G[:, n:] = np.eye(q * (N + 1))

    A_bar = np.zeros((N, nz, nz))
    B_bar = np.zeros((N, nz, m))
    for t in range(N):
        A_bar[t, :n, :n] = prob.A_seq[t]
        A_bar[t, :n, n:] = prob.A_seq[t] @ lift @ E0 - lift @ E1
        A_bar[t, n:, n:] = S
        B_bar[t, :n, :] = prob.B_seq[t]

    # (rho/2)||C x - r||^2 + rho (C x - r)' v in z-coordinates: C x - r = C e,
    # so the quadratic block sits on the error component only and the dual
    # enters as a linear term.
    CF = C @ F
    Q_bar = np.broadcast_to(0.5 * prob.rho * CF.T @ CF, (N + 1, nz, nz)).copy()
    q_lin = 0.5 * prob.rho * prob.duals @ CF

    R_eff = prob.R_seq.copy()
    s_lin = np.zeros((N, m))
    stage_const = np.zeros(N)
    if prob.action_targets is not None:
        b = prob.action_targets - prob.action_duals
        R_eff += 0.5 * prob.rho * np.eye(m)
        s_lin = -0.5 * prob.rho * b
        stage_const = 0.5 * prob.rho * np.sum(b * b, axis=1)

    z0 = np.concatenate([prob.xi - lift @ prob.references[0], prob.references.ravel()])
    return AugmentedSystem(
        A_bar=A_bar, B_bar=B_bar, Q_bar=Q_bar, q_lin=q_lin,
        R_eff=R_eff, s_lin=s_lin, stage_const=stage_const,
        F=F, G=G, z0=z0, lift=lift,
    )


@dataclass
class RiccatiSolution:
    """Value function and policy of an augmented tracking problem.

    The cost-to-go at stage t is z' P_t z + 2 p_t' z + c_t and the optimal
    input is u_t = -K_t z_t - nu_t. ``K_fb``/``K_ff`` split K_t into the
    blocks acting on the tracking error and on the reference window.
    """

    P: np.ndarray
    p: np.ndarray
    c: np.ndarray
    K: np.ndarray
    nu: np.ndarray
    K_fb: Optional[np.ndarray] = None
    K_ff: Optional[np.ndarray] = None

    def value(self, z: np.ndarray, t: int = 0) -> float:
        """Cost-to-go z' P_t z + 2 p_t' z + c_t."""
        return float(z @ self.P[t] @ z + 2.0 * self.p[t] @ z + self.c[t])


def solve_riccati(aug: AugmentedSystem, R_seq: Optional[np.ndarray] = None) -> RiccatiSolution:
    """Backward recursion for stage costs z'Qz + 2q'z + u'Ru + 2s'u + const.

    ``R_seq`` overrides the effective input cost stored on ``aug`` (it must
    already include any proximal contribution). The returned value function
    includes the accumulated stage constants, so ``value(z0)`` matches the
    realized objective of the simulated optimal trajectory.
    """
    N, nz = aug.horizon, aug.aug_dim
    m = aug.B_bar.shape[2]
    R_seq = aug.R_eff if R_seq is None else _as_sequence(R_seq, N)

    P = np.zeros((N + 1, nz, nz))
    p = np.zeros((N + 1, nz))
    c = np.zeros(N + 1)
    K = np.zeros((N, m, nz))
    nu = np.zeros((N, m))

    P[N] = aug.Q_bar[N]
    p[N] = aug.q_lin[N]
    for t in range(N - 1, -1, -1):
        A, B = aug.A_bar[t], aug.B_bar[t]
        PB = P[t + 1] @ B
        H = R_seq[t] + B.T @ PB
        H = 0.5 * (H + H.T)
        BPA = PB.T @ A
        h = B.T @ p[t + 1] + aug.s_lin[t]
        K[t] = np.linalg.solve(H, BPA)
        nu[t] = np.linalg.solve(H, h)
        P_t = aug.Q_bar[t] + A.T @ P[t + 1] @ A - BPA.T @ K[t]
        P[t] = 0.5 * (P_t + P_t.T)
        p[t] = aug.q_lin[t] + A.T @ p[t + 1] - K[t].T @ h
        c[t] = c[t + 1] + aug.stage_const[t] - h @ nu[t]
    return RiccatiSolution(P=P, p=p, c=c, K=K, nu=nu)


def decompose_gains(sol: RiccatiSolution, F: np.ndarray, G: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Split augmented gains into error-feedback and reference-feedforward.

    Since F'F + G'G = I, the identity K_t = K_fb_t F + K_ff_t G holds exactly
    and u_t = -K_fb_t e_t - K_ff_t mu_t - nu_t.
    """
    K_fb = sol.K @ F.T
    K_ff = sol.K @ G.T
    return K_fb, K_ff


def solve_tracking(prob: TrackingProblem) -> Tuple[Trajectory, RiccatiSolution]:
    """Solve the feedback-layer subproblem exactly.

    Returns the optimal trajectory of the original (non-augmented) system
    together with the Riccati solution (gains decomposed).
    """
    aug = build_augmented(prob)
    sol = solve_riccati(aug)
    sol.K_fb, sol.K_ff = decompose_gains(sol, aug.F, aug.G)

    N, n, m = prob.horizon, prob.state_dim, prob.input_dim
    inputs = np.zeros((N, m))
    z = aug.z0.copy()
    for t in range(N):
        inputs[t] = -sol.K[t] @ z - sol.nu[t]
        z = aug.A_bar[t] @ z + aug.B_bar[t] @ inputs[t]

    states = np.zeros((N + 1, n))
    states[0] = prob.xi
    for t in range(N):
        states[t + 1] = prob.A_seq[t] @ states[t] + prob.B_seq[t] @ inputs[t]
    return Trajectory(states=states, inputs=inputs), sol


def tracking_objective(prob: TrackingProblem, traj: Trajectory) -> float:
    """Evaluate the feedback-layer objective at a given trajectory."""
    C = np.eye(prob.state_dim) if prob.C is None else prob.C
    gap = traj.states @ C.T - prob.references
    total = 0.5 * prob.rho * float(np.sum(gap * gap))
    total += prob.rho * float(np.sum(gap * prob.duals))
    for t in range(prob.horizon):
        u = traj.inputs[t]
        total += float(u @ prob.R_seq[t] @ u)
        if prob.action_targets is not None:
            b = prob.action_targets[t] - prob.action_duals[t]
            total += 0.5 * prob.rho * float((u - b) @ (u - b))
    return total


def lqr_gain(
    A: np.ndarray,
    B: np.ndarray,
    C_x: np.ndarray,
    R: np.ndarray,
    horizon: int,
) -> np.ndarray:
    """Finite-horizon LQR gains for stage cost x'C_x x + u'R u.

    ``C_x`` is a single matrix (also the terminal cost) or a stack of
    horizon+1 matrices whose last entry is the terminal cost. A and B may
    be constant matrices or per-stage stacks. Returns gains K with
    u_t = -K_t x_t.
    """
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    A = _as_sequence(A, horizon)
    B = _as_sequence(B, horizon)
    n, m = A.shape[1], B.shape[2]
    C_x = np.asarray(C_x, dtype=float)
    if C_x.ndim == 2:
        C_x = np.broadcast_to(C_x, (horizon + 1,) + C_x.shape)
    if C_x.shape != (horizon + 1, n, n):
        raise ValueError(f"C_x must have shape ({horizon + 1}, {n}, {n})")
    for t in range(horizon + 1):
        if not np.allclose(C_x[t], C_x[t].T, atol=SYM_TOL):
            raise ValueError(f"C_x[{t}] is not symmetric")
        if np.linalg.eigvalsh(C_x[t])[0] < -SYM_TOL:
            raise ValueError(f"C_x[{t}] is not positive semidefinite")
    R = _as_sequence(R, horizon)
    for t in range(horizon):
        if np.linalg.eigvalsh(R[t])[0] <= 0.0:
            raise ValueError(f"R[{t}] is not positive definite")

    K = np.zeros((horizon, m, n))
    P = C_x[horizon].copy()
    for t in range(horizon - 1, -1, -1):
        PB = P @ B[t]
        H = R[t] + B[t].T @ PB
        K[t] = np.linalg.solve(0.5 * (H + H.T), PB.T @ A[t])
        P_t = C_x[t] + A[t].T @ P @ A[t] - (PB.T @ A[t]).T @ K[t]
        P = 0.5 * (P_t + P_t.T)
    return K
