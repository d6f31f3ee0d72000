"""Layered optimal control: consensus splitting into planning and tracking.

The solver alternates a trajectory-generation layer (proximal reference
updates under constraints) with a feedback-control layer (exact LQR tracking
for linear models, iLQR for nonlinear ones), coordinated by scaled dual
variables on the reference-consistency constraint.
"""

from .admm import (
    AdmmConfig,
    AdmmState,
    LayeredPolicy,
    LayeredProblem,
    admm_solve,
    iteration_count,
    ocp_objective,
    residuals,
    simulate_policy,
    solve_stochastic,
    update_rho,
)
from .bench import (
    ExperimentConfig,
    ExperimentReport,
    SolverRun,
    TrialRecord,
    read_report,
    run_experiment,
    sample_initial_conditions,
    success_rate,
    write_report,
)
from .dynamics import (
    DynamicsModel,
    NoiseModel,
    Trajectory,
    cartpole,
    double_integrator_2d,
    euler_discretize,
    linear_model,
    linearize,
    quadrotor,
    rollout,
    step,
    unicycle,
)
from .errors import (
    DivergenceError,
    InfeasibleConstraintError,
    LayeredOcpError,
    UnsupportedCostError,
)
from .ilqr import IlqrCost, IlqrResult, goal_cost, ilqr_solve, tracking_cost
from .tracking_lqr import (
    AugmentedSystem,
    RiccatiSolution,
    TrackingProblem,
    build_augmented,
    decompose_gains,
    lqr_gain,
    solve_riccati,
    solve_tracking,
    tracking_objective,
)
from .traj_opt import (
    Box,
    InputBox,
    ObstacleRect,
    ReferenceCost,
    corridor_constraints,
    goal_reference_cost,
    prox_input,
    prox_obstacle,
    prox_reference,
    target_tracking_cost,
)

__version__ = "0.1.0"
