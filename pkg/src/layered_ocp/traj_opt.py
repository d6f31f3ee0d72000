"""Trajectory-generation layer: proximal solves of the reference update.

Each outer iteration updates the reference by minimizing the utility cost
plus a quadratic coupling to the current state trajectory. All supported
costs are separable across timesteps and all constraints are per-timestep,
so the update decomposes into independent small problems with closed forms
(diagonal weights) or tiny bounded least-squares solves (general weights).
Rectangular obstacle avoidance is nonconvex but exactly solvable by
enumerating the four half-space restrictions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.optimize import lsq_linear

from .errors import InfeasibleConstraintError

PSD_TOL = 1e-9


@dataclass(frozen=True)
class ReferenceCost:
    """Separable quadratic reference cost sum_t (r_t - s_t)' Q_t (r_t - s_t) + c_t' r_t.

    ``weights`` is (N+1, q, q) or a single (q, q) matrix broadcast over time;
    ``targets`` is (N+1, q). The linear term defaults to zero.
    """

    weights: np.ndarray
    targets: np.ndarray
    linear: Optional[np.ndarray] = None

    def __post_init__(self):
        s = np.asarray(self.targets, dtype=float)
        if s.ndim != 2:
            raise ValueError("targets must have shape (N+1, q)")
        steps, q = s.shape
        W = np.asarray(self.weights, dtype=float)
        if W.ndim == 2:
            W = np.broadcast_to(W, (steps, q, q)).copy()
        if W.shape != (steps, q, q):
            raise ValueError(f"weights must have shape ({steps}, {q}, {q})")
        for t in range(steps):
            if not np.allclose(W[t], W[t].T, atol=1e-8):
                raise ValueError(f"weights[{t}] is not symmetric")
            if np.linalg.eigvalsh(W[t])[0] < -PSD_TOL:
                raise ValueError(f"weights[{t}] is not positive semidefinite")
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "targets", s)
        if self.linear is not None:
            c = np.asarray(self.linear, dtype=float)
            if c.shape != (steps, q):
                raise ValueError(f"linear must have shape ({steps}, {q})")
            object.__setattr__(self, "linear", c)

    @property
    def ref_dim(self) -> int:
        return self.targets.shape[1]

    @property
    def steps(self) -> int:
        return self.targets.shape[0]

    def stage_objective(self, r_t: np.ndarray, t: int) -> float:
        d = r_t - self.targets[t]
        val = float(d @ self.weights[t] @ d)
        if self.linear is not None:
            val += float(self.linear[t] @ r_t)
        return val

    def objective(self, r: np.ndarray) -> float:
        """Total utility cost of a reference sequence."""
        return sum(self.stage_objective(r[t], t) for t in range(self.steps))


def goal_reference_cost(
    goal: np.ndarray,
    horizon: int,
    stage_weight: float = 0.1,
    terminal_weight: float = 1000.0,
) -> ReferenceCost:
    """Drive-to-goal cost: mild stage pull, strong terminal pull."""
    g = np.asarray(goal, dtype=float)
    q = g.shape[0]
    W = np.broadcast_to(stage_weight * np.eye(q), (horizon + 1, q, q)).copy()
    W[horizon] = terminal_weight * np.eye(q)
    targets = np.broadcast_to(g, (horizon + 1, q)).copy()
    return ReferenceCost(weights=W, targets=targets)


def target_tracking_cost(targets: np.ndarray, weight: float = 1.0) -> ReferenceCost:
    """Uniformly weighted tracking of a per-step target sequence."""
    targets = np.asarray(targets, dtype=float)
    return ReferenceCost(weights=weight * np.eye(targets.shape[1]), targets=targets)


@dataclass(frozen=True)
class Box:
    """Coordinatewise bounds l <= r <= u; +/-inf entries leave coordinates free."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("lower and upper must have the same shape")
        if np.any(lo > hi):
            raise ValueError("empty box: lower exceeds upper")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    def contains(self, r: np.ndarray) -> bool:
        return bool(np.all(r >= self.lower) and np.all(r <= self.upper))


def coordinate_box(dim: int, coord: int, lo: float, hi: float) -> Box:
    """Box constraining a single coordinate, all others free."""
    lower = np.full(dim, -np.inf)
    upper = np.full(dim, np.inf)
    lower[coord] = lo
    upper[coord] = hi
    return Box(lower=lower, upper=upper)


@dataclass(frozen=True)
class ObstacleRect:
    """Keep-out axis-aligned rectangle on two coordinates of the reference.

    Feasible points lie outside the open rectangle: at least one of
    r_i <= x_min, r_i >= x_max, r_j <= y_min, r_j >= y_max holds.
    """

    x_min: float
    y_min: float
    x_max: float
    y_max: float
    coords: tuple = (0, 1)

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("rectangle corners must satisfy min < max")

    def excludes(self, r: np.ndarray) -> bool:
        """True when the point is outside the open rectangle."""
        i, j = self.coords
        return bool(
            r[i] <= self.x_min or r[i] >= self.x_max
            or r[j] <= self.y_min or r[j] >= self.y_max
        )


@dataclass(frozen=True)
class InputBox:
    """Symmetric input bound |a| <= bound, coordinatewise."""

    bound: Union[float, np.ndarray]

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.bound, dtype=float))
        if np.any(b <= 0.0):
            raise ValueError("bound must be positive")
        object.__setattr__(self, "bound", b)


Constraint = Union[None, Box, ObstacleRect]


def _is_diagonal(Q: np.ndarray) -> bool:
    return np.count_nonzero(Q - np.diag(np.diag(Q))) == 0


def _stage_objective(r, Q, s, c, rho, anchor) -> float:
    d = r - s
    gap = r - anchor
    val = float(d @ Q @ d) + 0.5 * rho * float(gap @ gap)
    if c is not None:
        val += float(c @ r)
    return val


def _unconstrained_prox(Q, s, c, rho, anchor) -> np.ndarray:
    rhs = 2.0 * Q @ s + rho * anchor
    if c is not None:
        rhs = rhs - c
    return np.linalg.solve(2.0 * Q + rho * np.eye(Q.shape[0]), rhs)


def _box_prox(Q, s, c, rho, anchor, lower, upper) -> np.ndarray:
    if _is_diagonal(Q):
        return np.clip(_unconstrained_prox(Q, s, c, rho, anchor), lower, upper)
    # General PSD weight: the stage problem is a bounded least-squares
    # instance, solved exactly by an active-set method.
    M = Q + 0.5 * rho * np.eye(Q.shape[0])
    h = Q @ s + 0.5 * rho * anchor
    if c is not None:
        h = h - 0.5 * c
    L = np.linalg.cholesky(M)
    b = np.linalg.solve(L, h)
    res = lsq_linear(L.T, b, bounds=(lower, upper), method="bvls")
    return np.clip(res.x, lower, upper)


def prox_reference(
    cost: ReferenceCost,
    anchor: np.ndarray,
    rho: float,
    constraints: Optional[Sequence[Constraint]] = None,
) -> np.ndarray:
    """Exact reference update: per-timestep proximal minimization.

    For each t, minimizes (r - s_t)' Q_t (r - s_t) + c_t' r
    + (rho/2)||anchor_t - r||^2 over the timestep's constraint set.

    Raises:
        InfeasibleConstraintError: empty box at some timestep.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    anchor = np.asarray(anchor, dtype=float)
    steps, q = cost.steps, cost.ref_dim
    if anchor.shape != (steps, q):
        raise ValueError(f"anchor must have shape ({steps}, {q})")
    if constraints is not None and len(constraints) != steps:
        raise ValueError(f"constraints must have {steps} entries")

    r = np.zeros((steps, q))
    for t in range(steps):
        Q, s = cost.weights[t], cost.targets[t]
        c = None if cost.linear is None else cost.linear[t]
        con = None if constraints is None else constraints[t]
        if con is None:
            r[t] = _unconstrained_prox(Q, s, c, rho, anchor[t])
        elif isinstance(con, Box):
            lo = np.broadcast_to(con.lower, (q,))
            hi = np.broadcast_to(con.upper, (q,))
            if np.any(lo > hi):
                raise InfeasibleConstraintError(t)
            r[t] = _box_prox(Q, s, c, rho, anchor[t], lo, hi)
        elif isinstance(con, ObstacleRect):
            r[t] = prox_obstacle(anchor[t], Q, s, rho, con, linear=c)
        else:
            raise ValueError(f"unsupported constraint type at t={t}: {type(con)!r}")
    return r


def prox_obstacle(
    anchor: np.ndarray,
    weight: np.ndarray,
    target: np.ndarray,
    rho: float,
    rect: ObstacleRect,
    linear: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Exact stage prox over the complement of an open rectangle.

    Restricting to each of the four half-spaces (left of x_min, right of
    x_max, below y_min, above y_max) gives a convex subproblem; their
    solutions cover every feasible activation pattern, so the best candidate
    is the global minimizer. Ties resolve by the fixed candidate order
    left, right, bottom, top.
    """
    anchor = np.asarray(anchor, dtype=float)
    q = anchor.shape[0]
    i, j = rect.coords
    faces = (
        (i, -np.inf, rect.x_min),
        (i, rect.x_max, np.inf),
        (j, -np.inf, rect.y_min),
        (j, rect.y_max, np.inf),
    )
    best = None
    best_val = np.inf
    for coord, lo_val, hi_val in faces:
        lo = np.full(q, -np.inf)
        hi = np.full(q, np.inf)
        lo[coord] = lo_val
        hi[coord] = hi_val
        cand = _box_prox(weight, target, linear, rho, anchor, lo, hi)
        val = _stage_objective(cand, weight, target, linear, rho, anchor)
        if val < best_val:
            best, best_val = cand, val
    return best


def prox_input(u_plus_dual: np.ndarray, bound: Union[float, np.ndarray, InputBox]) -> np.ndarray:
    """Redundant-action update: clip to the symmetric input box."""
    b = bound.bound if isinstance(bound, InputBox) else np.atleast_1d(np.asarray(bound, dtype=float))
    if np.any(b <= 0.0):
        raise ValueError("bound must be positive")
    return np.clip(np.asarray(u_plus_dual, dtype=float), -b, b)


def corridor_constraints(
    horizon: int,
    ref_dim: int,
    first_window: tuple = (0.0, 1.0),
    second_window: tuple = (1.5, 2.5),
    first_coord: int = 0,
    second_coord: int = 1,
) -> list:
    """L-shaped corridor schedule over a reference of length horizon+1.

    Steps t <= horizon//2 constrain the first coordinate to ``first_window``;
    the remaining steps constrain the second coordinate to ``second_window``.
    """
    first = coordinate_box(ref_dim, first_coord, *first_window)
    second = coordinate_box(ref_dim, second_coord, *second_window)
    half = horizon // 2
    return [first if t <= half else second for t in range(horizon + 1)]
