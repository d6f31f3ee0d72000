"""Discrete-time dynamical systems and trajectory rollout.

Provides the linear benchmark system plus the three nonlinear benchmark
models (cartpole, unicycle, quadrotor) under Euler discretization, along
with Jacobian linearization and forward simulation utilities used by the
tracking solvers and the benchmark harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DivergenceError

# Forward simulation aborts once any state entry passes this magnitude so
# diverging solves fail fast with a usable timestep index.
DIVERGENCE_LIMIT = 1e6

# Central finite-difference step for the fallback Jacobians.
FD_STEP = 1e-6


@dataclass(frozen=True)
class Trajectory:
    """A state sequence of length N+1 paired with an input sequence of length N."""

    states: np.ndarray  # (N+1, n)
    inputs: np.ndarray  # (N, m)

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        inputs = np.asarray(self.inputs, dtype=float)
        if inputs.size == 0:
            inputs = inputs.reshape(0, inputs.shape[-1] if inputs.ndim == 2 else 0)
        inputs = np.atleast_2d(inputs) if inputs.size else inputs
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        if self.states.shape[0] != self.inputs.shape[0] + 1:
            raise ValueError(
                f"states ({self.states.shape[0]}) must be one longer than "
                f"inputs ({self.inputs.shape[0]})"
            )

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    @property
    def state_dim(self) -> int:
        return self.states.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1] if self.inputs.size else 0


@dataclass(frozen=True)
class DynamicsModel:
    """Discrete-time system x_{t+1} = f(x_t, u_t).

    ``jacobians``, when present, returns the analytic pair (A, B) = (df/dx, df/du)
    at a point; models without it fall back to central finite differences.
    ``params`` records the physical constants so benchmark reports are
    self-describing.
    """

    state_dim: int
    input_dim: int
    label: str
    step_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]
    jacobians: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None
    dt: Optional[float] = None
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class NoiseModel:
    """Additive process noise H w_t with w_t ~ N(0, I)."""

    H: np.ndarray  # (n, n_w)

    def __post_init__(self):
        object.__setattr__(self, "H", np.atleast_2d(np.asarray(self.H, dtype=float)))

    @property
    def noise_dim(self) -> int:
        return self.H.shape[1]

    def sample(self, rng: np.random.Generator, steps: int) -> np.ndarray:
        """Draw an (steps, n_w) block of i.i.d. standard normal disturbances."""
        return rng.standard_normal((steps, self.noise_dim))


def step(model: DynamicsModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Advance the system one step: f(x, u)."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (model.state_dim,):
        raise ValueError(f"state has shape {x.shape}, expected ({model.state_dim},)")
    if u.shape != (model.input_dim,):
        raise ValueError(f"input has shape {u.shape}, expected ({model.input_dim},)")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(u))):
        raise ValueError("state and input entries must be finite")
    return np.asarray(model.step_fn(x, u), dtype=float)


def euler_discretize(
    continuous_rhs: Callable[[np.ndarray, np.ndarray], np.ndarray],
    dt: float,
    state_dim: int,
    input_dim: int,
    label: str = "euler",
    rhs_jacobians: Optional[Callable[[np.ndarray, np.ndarray], tuple]] = None,
    params: Optional[dict] = None,
) -> DynamicsModel:
    """Build the discrete model f(x, u) = x + dt * rhs(x, u).

    ``rhs_jacobians`` gives the continuous-time Jacobians (dr/dx, dr/du); the
    returned model exposes their discretized form I + dt*A_c and dt*B_c.
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")

    def step_fn(x, u):
        return x + dt * np.asarray(continuous_rhs(x, u), dtype=float)

    jacobians = None
    if rhs_jacobians is not None:
        eye = np.eye(state_dim)

        def jacobians(x, u):
            A_c, B_c = rhs_jacobians(x, u)
            return eye + dt * np.asarray(A_c), dt * np.asarray(B_c)

    return DynamicsModel(
        state_dim=state_dim,
        input_dim=input_dim,
        label=label,
        step_fn=step_fn,
        jacobians=jacobians,
        dt=dt,
        params=dict(params or {}),
    )


def linearize(model: DynamicsModel, x: np.ndarray, u: np.ndarray) -> tuple:
    """Jacobians (A, B) of f at (x, u); analytic where available, else central FD."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if model.jacobians is not None:
        A, B = model.jacobians(x, u)
        A, B = np.asarray(A, dtype=float), np.asarray(B, dtype=float)
    else:
        A = _fd_jacobian(lambda xx: model.step_fn(xx, u), x, model.state_dim)
        B = _fd_jacobian(lambda uu: model.step_fn(x, uu), u, model.state_dim)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
        raise FloatingPointError("non-finite Jacobian entries")
    return A, B


def _fd_jacobian(fn, z: np.ndarray, out_dim: int, h: float = FD_STEP) -> np.ndarray:
    J = np.empty((out_dim, z.size))
    for i in range(z.size):
        dz = np.zeros_like(z)
        dz[i] = h
        J[:, i] = (np.asarray(fn(z + dz)) - np.asarray(fn(z - dz))) / (2 * h)
    return J


def rollout(
    model: DynamicsModel,
    x0: np.ndarray,
    inputs: Sequence[np.ndarray] | np.ndarray,
    noise: Optional[NoiseModel] = None,
    seed: Optional[int] = None,
) -> Trajectory:
    """Simulate forward from x0 under the given input sequence.

    With a ``noise`` model, adds H w_t at each step from a generator seeded by
    ``seed``; identical seeds give bit-identical trajectories.

    Raises:
        DivergenceError: if any state entry exceeds the divergence limit.
    """
    x0 = np.asarray(x0, dtype=float)
    inputs = np.asarray(inputs, dtype=float).reshape(-1, model.input_dim)
    N = inputs.shape[0]
    states = np.empty((N + 1, model.state_dim))
    states[0] = x0

    w = None
    if noise is not None:
        rng = np.random.default_rng(seed)
        w = noise.sample(rng, N)

    for t in range(N):
        x_next = np.asarray(model.step_fn(states[t], inputs[t]), dtype=float)
        if noise is not None:
            x_next = x_next + noise.H @ w[t]
        if not np.all(np.isfinite(x_next)) or np.any(np.abs(x_next) > DIVERGENCE_LIMIT):
            raise DivergenceError(t + 1)
        states[t + 1] = x_next
    return Trajectory(states=states, inputs=inputs)


# ---------------------------------------------------------------------------
# Benchmark models
# ---------------------------------------------------------------------------


def linear_model(A: np.ndarray, B: np.ndarray, label: str = "linear") -> DynamicsModel:
    """Linear time-invariant system x_{t+1} = A x + B u with constant Jacobians."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    n, m = A.shape[0], B.shape[1]
    if A.shape != (n, n) or B.shape[0] != n:
        raise ValueError(f"incompatible shapes A{A.shape}, B{B.shape}")

    return DynamicsModel(
        state_dim=n,
        input_dim=m,
        label=label,
        step_fn=lambda x, u: A @ x + B @ u,
        jacobians=lambda x, u: (A, B),
        params={"A": A.tolist(), "B": B.tolist()},
    )


def double_integrator_2d() -> DynamicsModel:
    """The 2-D benchmark system with A = [[1, 1], [0, 1]] and B = I."""
    return linear_model(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2))


def cartpole(
    m_cart: float = 1.0,
    m_pole: float = 0.1,
    length: float = 1.0,
    gravity: float = 9.81,
    dt: float = 0.1,
) -> DynamicsModel:
    """Cartpole under Euler discretization.

    State (pos, theta, pos_dot, theta_dot) with theta = pi the inverted pole;
    input is the horizontal force on the cart. Manipulator form
    H(q) qdd + C(q, qd) qd + G(q) = F.
    """
    params = {
        "m_cart": m_cart,
        "m_pole": m_pole,
        "length": length,
        "gravity": gravity,
        "dt": dt,
    }

    def rhs(x, u):
        _, theta, pos_dot, theta_dot = x
        sin_t, cos_t = np.sin(theta), np.cos(theta)
        H = np.array(
            [
                [m_cart + m_pole, m_pole * length * cos_t],
                [m_pole * length * cos_t, m_pole * length**2],
            ]
        )
        C_qd = np.array([-m_pole * length * theta_dot**2 * sin_t, 0.0])
        G = np.array([0.0, m_pole * gravity * length * sin_t])
        F = np.array([u[0], 0.0])
        qdd = np.linalg.solve(H, F - C_qd - G)
        return np.array([pos_dot, theta_dot, qdd[0], qdd[1]])

    return euler_discretize(rhs, dt, state_dim=4, input_dim=1, label="cartpole", params=params)


def cartpole_energy(model: DynamicsModel, x: np.ndarray) -> float:
    """Total mechanical energy of a cartpole state (drift diagnostic)."""
    p = model.params
    m_c, m_p, l, g = p["m_cart"], p["m_pole"], p["length"], p["gravity"]
    _, theta, pos_dot, theta_dot = x
    H = np.array(
        [
            [m_c + m_p, m_p * l * np.cos(theta)],
            [m_p * l * np.cos(theta), m_p * l**2],
        ]
    )
    qd = np.array([pos_dot, theta_dot])
    kinetic = 0.5 * qd @ H @ qd
    potential = -m_p * g * l * np.cos(theta)
    return float(kinetic + potential)


def unicycle(dt: float = 0.1) -> DynamicsModel:
    """Unicycle (x, y, heading) with inputs (speed, turn rate), Euler discretized."""

    def rhs(x, u):
        theta = x[2]
        v, omega = u
        return np.array([v * np.cos(theta), v * np.sin(theta), omega])

    def rhs_jacobians(x, u):
        theta = x[2]
        v = u[0]
        A_c = np.array(
            [
                [0.0, 0.0, -v * np.sin(theta)],
                [0.0, 0.0, v * np.cos(theta)],
                [0.0, 0.0, 0.0],
            ]
        )
        B_c = np.array(
            [
                [np.cos(theta), 0.0],
                [np.sin(theta), 0.0],
                [0.0, 1.0],
            ]
        )
        return A_c, B_c

    return euler_discretize(
        rhs, dt, state_dim=3, input_dim=2, label="unicycle",
        rhs_jacobians=rhs_jacobians, params={"dt": dt},
    )


def quadrotor(
    mass: float = 1.0,
    inertia: Sequence[float] = (0.01, 0.01, 0.02),
    gravity: float = 9.81,
    dt: float = 0.1,
) -> DynamicsModel:
    """12-state quadrotor, Euler discretized.

    State (position, velocity, roll-pitch-yaw, angular rates), inputs
    (collective thrust, body torques). Euler-angle rates are identified with
    the angular rates, which keeps the model control-affine.
    """
    inertia = np.asarray(inertia, dtype=float)
    params = {
        "mass": mass,
        "inertia": inertia.tolist(),
        "gravity": gravity,
        "dt": dt,
    }

    def rhs(x, u):
        vel = x[3:6]
        roll, pitch, yaw = x[6:9]
        omega = x[9:12]
        thrust, torque = u[0], u[1:4]

        # Body z-axis in world frame, ZYX Euler convention.
        body_z = np.array(
            [
                np.cos(roll) * np.sin(pitch) * np.cos(yaw) + np.sin(roll) * np.sin(yaw),
                np.cos(roll) * np.sin(pitch) * np.sin(yaw) - np.sin(roll) * np.cos(yaw),
                np.cos(roll) * np.cos(pitch),
            ]
        )
        accel = (thrust / mass) * body_z - np.array([0.0, 0.0, gravity])
        omega_dot = (torque - np.cross(omega, inertia * omega)) / inertia
        return np.concatenate([vel, accel, omega, omega_dot])

    return euler_discretize(rhs, dt, state_dim=12, input_dim=4, label="quadrotor", params=params)


def hover_input(model: DynamicsModel) -> np.ndarray:
    """Equilibrium input for the quadrotor (gravity-cancelling thrust)."""
    return np.array([model.params["mass"] * model.params["gravity"], 0.0, 0.0, 0.0])
