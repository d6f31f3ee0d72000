"""Self-contained oracle-equivalence checks, runnable via `layered-ocp verify`.

Each check re-derives an answer through an independent route (dense stacked
KKT solves, grid search, hand arithmetic) and compares it against the
structured solvers. These are quick smoke-level versions of the full test
suite, meant for installed-package sanity checks.
"""

from __future__ import annotations

from typing import List, Tuple

import numpy as np

from .admm import AdmmConfig, admm_solve
from .experiments import build_problem, default_admm_config
from .oracles import solve_ocp_qp, solve_tracking_qp
from .tracking_lqr import TrackingProblem, solve_tracking, tracking_objective
from .traj_opt import ObstacleRect, prox_obstacle


def _random_tracking_problem(rng: np.random.Generator) -> TrackingProblem:
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 3))
    N = int(rng.integers(3, 12))
    A = rng.standard_normal((N, n, n)) * 0.5
    B = rng.standard_normal((N, n, m))
    M = rng.standard_normal((m, m))
    R = np.broadcast_to(M @ M.T + 0.1 * np.eye(m), (N, m, m)).copy()
    return TrackingProblem(
        A_seq=A, B_seq=B, R_seq=R, rho=float(rng.uniform(0.5, 5.0)),
        references=rng.standard_normal((N + 1, n)),
        duals=rng.standard_normal((N + 1, n)),
        xi=rng.standard_normal(n),
    )


def check_tracking_oracle(instances: int = 10, seed: int = 0) -> Tuple[bool, str]:
    """Structured tracking solve vs dense KKT solve on random instances."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(instances):
        prob = _random_tracking_problem(rng)
        traj, _ = solve_tracking(prob)
        _, _, obj_star = solve_tracking_qp(
            prob.A_seq, prob.B_seq, prob.R_seq, prob.rho,
            prob.references, prob.duals, prob.xi,
        )
        rel = abs(tracking_objective(prob, traj) - obj_star) / max(abs(obj_star), 1e-12)
        worst = max(worst, rel)
    return worst <= 1e-6, f"worst relative objective gap {worst:.2e} over {instances} instances"


def check_decomposition(seed: int = 1) -> Tuple[bool, str]:
    """Gain split K = K_fb F + K_ff G reconstructs the augmented gain exactly."""
    rng = np.random.default_rng(seed)
    prob = _random_tracking_problem(rng)
    from .tracking_lqr import build_augmented, decompose_gains, solve_riccati

    aug = build_augmented(prob)
    sol = solve_riccati(aug)
    K_fb, K_ff = decompose_gains(sol, aug.F, aug.G)
    recon = K_fb @ aug.F + K_ff @ aug.G
    exact = np.array_equal(recon, sol.K)
    return exact, "reconstruction exact" if exact else "reconstruction differs"


def check_linear_admm(seed: int = 0) -> Tuple[bool, str]:
    """Consensus solve on the planar tracking benchmark vs the dense optimum."""
    prob = build_problem("linear-circle", 20, np.zeros(2))
    cfg = default_admm_config("linear-circle")
    state, _, diag = admm_solve(prob, cfg)
    A = np.asarray(prob.model.params["A"], dtype=float)
    B = np.asarray(prob.model.params["B"], dtype=float)
    N = prob.horizon
    _, _, p_star = solve_ocp_qp(
        np.broadcast_to(A, (N,) + A.shape), np.broadcast_to(B, (N,) + B.shape),
        prob.R_seq, prob.cost.weights, prob.cost.targets, prob.xi,
    )
    rel = abs(diag["objective"] - p_star) / abs(p_star)
    primal_sq = diag["primal_residuals"][-1] ** 2
    ok = diag["converged"] and primal_sq <= 1e-2 and rel <= 1e-4
    return ok, f"objective gap {rel:.2e}, final primal^2 {primal_sq:.2e}"


def check_rho_consistency(seed: int = 0) -> Tuple[bool, str]:
    """Fixed-penalty and adaptive-penalty runs settle on the same solution."""
    prob = build_problem("linear-circle", 20, np.zeros(2))
    fixed = default_admm_config("linear-circle", adapt_rho=False)
    adaptive = default_admm_config("linear-circle", adapt_rho=True)
    s1, _, _ = admm_solve(prob, fixed)
    s2, _, _ = admm_solve(prob, adaptive)
    gap = float(np.max(np.abs(s1.trajectory.states - s2.trajectory.states)))
    return gap <= 1e-4, f"max state gap {gap:.2e}"


def check_obstacle_prox(seed: int = 3, trials: int = 25) -> Tuple[bool, str]:
    """Closed-form obstacle prox vs a fine grid over the rectangle complement."""
    rng = np.random.default_rng(seed)
    rect = ObstacleRect(x_min=1.0, y_min=0.5, x_max=1.5, y_max=1.0)
    Q = 0.1 * np.eye(2)
    worst = 0.0
    grid = np.linspace(-1.0, 3.0, 401)
    X, Y = np.meshgrid(grid, grid)
    outside = (X <= rect.x_min) | (X >= rect.x_max) | (Y <= rect.y_min) | (Y >= rect.y_max)
    pts = np.stack([X[outside], Y[outside]], axis=1)
    for _ in range(trials):
        anchor = rng.uniform(0.0, 2.5, size=2)
        target = rng.uniform(0.0, 2.5, size=2)
        rho = float(rng.uniform(0.5, 4.0))
        r = prox_obstacle(anchor, Q, target, rho, rect)
        d = pts - target
        vals = np.einsum("ij,jk,ik->i", d, Q, d) + 0.5 * rho * np.sum((pts - anchor) ** 2, axis=1)
        dd = r - target
        val = float(dd @ Q @ dd) + 0.5 * rho * float((r - anchor) @ (r - anchor))
        gap = val - float(vals.min())
        worst = max(worst, gap)
        if not rect.excludes(r):
            return False, f"infeasible prox output {r}"
    return worst <= 1e-3, f"worst objective excess vs grid {worst:.2e}"


CHECKS = [
    ("tracking-oracle", check_tracking_oracle),
    ("gain-decomposition", check_decomposition),
    ("linear-consensus-exactness", check_linear_admm),
    ("rho-consistency", check_rho_consistency),
    ("obstacle-prox-grid", check_obstacle_prox),
]


def run_verify() -> List[Tuple[str, bool, str]]:
    """Run every check; returns (name, passed, detail) triples."""
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append((name, ok, detail))
    return results
