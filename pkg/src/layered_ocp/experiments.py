"""Benchmark experiment definitions.

Each experiment names a system, a reference cost, optional constraints, and
the sampling scheme for initial conditions. The builders here return fully
assembled problems so the CLI, the tests, and the verification suite all run
the same instances.
"""

from __future__ import annotations

import math
from typing import Optional, Tuple

import numpy as np

from .admm import AdmmConfig, LayeredProblem
from .dynamics import (
    DynamicsModel,
    NoiseModel,
    cartpole,
    double_integrator_2d,
    quadrotor,
    unicycle,
)
from .ilqr import IlqrCost, goal_cost
from .traj_opt import (
    InputBox,
    ObstacleRect,
    ReferenceCost,
    corridor_constraints,
    goal_reference_cost,
    target_tracking_cost,
)

STAGE_WEIGHT = 0.1
TERMINAL_WEIGHT = 1000.0
INPUT_WEIGHT = 0.01
SPEED_BOUND = 7.0
OBSTACLE = ObstacleRect(x_min=1.0, y_min=0.5, x_max=1.5, y_max=1.0, coords=(0, 1))

UNICYCLE_GOAL = np.array([3.0, 2.0])
QUADROTOR_GOAL = np.array([3.0, 2.0, 1.5])
CARTPOLE_GOAL = np.array([0.0, math.pi, 0.0, 0.0])

_LINEAR = ("linear-circle", "linear-noise")
_UNICYCLE = (
    "unicycle",
    "unicycle-corridor",
    "unicycle-low-order",
    "unicycle-low-order-corridor",
    "unicycle-low-order-corridor-vel",
    "unicycle-obstacle",
)
_QUADROTOR = ("quadrotor", "quadrotor-low-order")

EXPERIMENTS = _LINEAR + ("cartpole",) + _UNICYCLE + _QUADROTOR


def experiment_names() -> Tuple[str, ...]:
    return EXPERIMENTS


def default_horizon(name: str) -> int:
    _check_name(name)
    return 40 if name == "cartpole" else 20


def _check_name(name: str):
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; choices: {', '.join(EXPERIMENTS)}")


def circle_targets(horizon: int, radius: float = 2.0, omega: float = 0.5) -> np.ndarray:
    """Planar circle samples radius*(cos wt, sin wt) for t = 0..horizon."""
    t = np.arange(horizon + 1)
    return radius * np.stack([np.cos(omega * t), np.sin(omega * t)], axis=1)


def _low_order_selector(state_dim: int, ref_dim: int) -> np.ndarray:
    C = np.zeros((ref_dim, state_dim))
    C[:, :ref_dim] = np.eye(ref_dim)
    return C


def _full_goal(name: str) -> np.ndarray:
    """Goal lifted to full state space (used by full-order costs and baselines)."""
    if name == "cartpole":
        return CARTPOLE_GOAL.copy()
    if name in _UNICYCLE:
        return np.concatenate([UNICYCLE_GOAL, [0.0]])
    if name in _QUADROTOR:
        return np.concatenate([QUADROTOR_GOAL, np.zeros(9)])
    raise ValueError(f"no goal for {name!r}")


def make_model(name: str) -> DynamicsModel:
    _check_name(name)
    if name in _LINEAR:
        return double_integrator_2d()
    if name == "cartpole":
        return cartpole()
    if name in _UNICYCLE:
        return unicycle()
    return quadrotor()


def build_problem(name: str, horizon: int, xi: np.ndarray) -> LayeredProblem:
    """Assemble the layered problem for one experiment trial."""
    _check_name(name)
    model = make_model(name)
    xi = np.asarray(xi, dtype=float)

    if name in _LINEAR:
        cost = target_tracking_cost(circle_targets(horizon), weight=1.0)
        noise = NoiseModel(H=0.1 * np.eye(2)) if name == "linear-noise" else None
        return LayeredProblem(
            model=model, cost=cost, R_seq=0.001 * np.eye(2),
            horizon=horizon, xi=xi, noise=noise,
        )

    low_order = "low-order" in name
    C = None
    if low_order:
        ref_dim = 2 if name in _UNICYCLE else 3
        C = _low_order_selector(model.state_dim, ref_dim)
    goal_ref = (
        (UNICYCLE_GOAL if name in _UNICYCLE else QUADROTOR_GOAL)
        if low_order else _full_goal(name)
    )
    cost = goal_reference_cost(goal_ref, horizon, STAGE_WEIGHT, TERMINAL_WEIGHT)

    constraints = None
    if "corridor" in name:
        constraints = corridor_constraints(horizon, cost.ref_dim)
    elif name == "unicycle-obstacle":
        constraints = [OBSTACLE] * (horizon + 1)
    input_bound = InputBox(SPEED_BOUND) if name.endswith("-vel") else None

    return LayeredProblem(
        model=model, cost=cost, R_seq=INPUT_WEIGHT * np.eye(model.input_dim),
        horizon=horizon, xi=xi, constraints=constraints,
        input_bound=input_bound, C=C,
    )


def baseline_cost(name: str) -> Optional[IlqrCost]:
    """Vanilla-solver cost with the same design weights; None for linear runs."""
    _check_name(name)
    if name in _LINEAR:
        return None
    return goal_cost(_full_goal(name), STAGE_WEIGHT, TERMINAL_WEIGHT, INPUT_WEIGHT)


def ic_spec(name: str) -> Tuple[str, np.ndarray]:
    """Initial-condition distribution and offset for an experiment.

    The draw is dist-per-coordinate plus the offset; "fixed" experiments
    always start at the offset itself.
    """
    _check_name(name)
    if name in _LINEAR:
        return "fixed", np.zeros(2)
    if name == "cartpole":
        # Standard-uniform draws over the full state: the pole starts near
        # hanging, so every trial demands a genuine swing-up.
        return "uniform", np.zeros(4)
    if name in _UNICYCLE:
        return "normal", np.zeros(3)
    return "normal", np.zeros(12)


def success_spec(name: str, horizon: int) -> Tuple[np.ndarray, Optional[Tuple[int, ...]]]:
    """Goal point and the state coordinates the 0.5-ball test applies to.

    None for the coordinates means the full state.
    """
    _check_name(name)
    if name in _LINEAR:
        return circle_targets(horizon)[-1], None
    if name == "cartpole":
        return CARTPOLE_GOAL.copy(), None
    if name in _UNICYCLE:
        return UNICYCLE_GOAL.copy(), (0, 1)
    return QUADROTOR_GOAL.copy(), (0, 1, 2)


def default_admm_config(name: str, **overrides) -> AdmmConfig:
    """Per-experiment solver defaults; keyword overrides win."""
    _check_name(name)
    if name in _LINEAR:
        base = dict(rho0=1.0, eps_primal=1e-8, eps_dual=1e-4, max_outer=1000)
    else:
        # Nonlinear benchmarks stop on the primal residual alone; the dual
        # tolerance stays off so consensus quality is what ends a run.
        base = dict(
            rho0=25.0, eps_primal=1e-2, eps_dual=math.inf,
            max_outer=200, max_inner=10,
        )
    base.update({k: v for k, v in overrides.items() if v is not None})
    return AdmmConfig(**base)


def constraint_overlays(name: str, horizon: int) -> dict:
    """Geometry the figure renderer draws on top of trajectories."""
    _check_name(name)
    overlays: dict = {}
    if "corridor" in name:
        overlays["corridor"] = {
            "first_coord": 0, "first_window": [0.0, 1.0],
            "second_coord": 1, "second_window": [1.5, 2.5],
            "switch_after": horizon // 2,
        }
    if name == "unicycle-obstacle":
        overlays["obstacle"] = {
            "x_min": OBSTACLE.x_min, "y_min": OBSTACLE.y_min,
            "x_max": OBSTACLE.x_max, "y_max": OBSTACLE.y_max,
        }
    if name.endswith("-vel"):
        overlays["input_bound"] = SPEED_BOUND
    if name in _LINEAR:
        overlays["target"] = "circle"
    return overlays
