"""Benchmark harness: seeded trial batches, paired solver comparison, reports.

Runs the layered solver and the vanilla iLQR baseline on identical initial
conditions, evaluates the 0.5-ball success criterion, and serializes
per-trial records, residual traces, and trajectory dumps as JSON or CSV
under a versioned schema.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import experiments
from .admm import LayeredProblem, admm_solve, ocp_objective, simulate_policy, solve_stochastic
from .errors import DivergenceError, InfeasibleConstraintError
from .ilqr import ilqr_solve
from .oracles import solve_ocp_qp

SCHEMA = "layered-ocp-report/1"
SUCCESS_RADIUS = 0.5
BASELINE_MAX_ITERS = 200


@dataclass(frozen=True)
class ExperimentConfig:
    """User-facing knobs of one benchmark run."""

    experiment: str
    trials: int = 20
    seed: int = 0
    horizon: Optional[int] = None
    rho: Optional[float] = None
    max_outer: Optional[int] = None
    eps_primal: Optional[float] = None

    def __post_init__(self):
        if self.experiment not in experiments.experiment_names():
            raise ValueError(
                f"unknown experiment {self.experiment!r}; "
                f"choices: {', '.join(experiments.experiment_names())}"
            )
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be at least 1")

    @property
    def resolved_horizon(self) -> int:
        return self.horizon if self.horizon is not None else experiments.default_horizon(self.experiment)


@dataclass
class SolverRun:
    """One solver's outcome on one trial."""

    terminal_state: Optional[list]
    terminal_distance: float
    success: bool
    outer_iterations: int
    total_iterations: int
    converged: bool
    objective: Optional[float] = None
    primal_residuals: list = field(default_factory=list)
    dual_residuals: list = field(default_factory=list)
    reference: Optional[list] = None
    states: Optional[list] = None
    inputs: Optional[list] = None
    actions: Optional[list] = None
    failure: Optional[str] = None
    oracle_objective: Optional[float] = None
    oracle_match: Optional[bool] = None


@dataclass
class TrialRecord:
    trial: int
    initial_state: list
    admm: SolverRun
    baseline: Optional[SolverRun] = None


@dataclass
class ExperimentReport:
    schema: str
    experiment: str
    config: dict
    goal: list
    success_coords: Optional[list]
    target: Optional[list]
    overlays: dict
    trials: List[TrialRecord]
    aggregates: dict


def sample_initial_conditions(dist: str, n: int, dim: int, seed: int) -> np.ndarray:
    """Seeded batch of initial conditions, one row per trial.

    "uniform" draws each coordinate on [0, 1); "normal" draws standard
    Gaussians.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if dist == "uniform":
        return rng.random((n, dim))
    if dist == "normal":
        return rng.standard_normal((n, dim))
    raise ValueError(f"unknown distribution {dist!r}")


def success_rate(records: Sequence) -> float:
    """Percentage of records whose terminal state lies strictly inside the
    0.5-radius goal ball. Accepts SolverRun objects or plain booleans."""
    records = list(records)
    if not records:
        raise ValueError("records must be non-empty")
    flags = [bool(getattr(rec, "success", rec)) for rec in records]
    return 100.0 * sum(flags) / len(flags)


def terminal_distance(terminal: np.ndarray, goal: np.ndarray, coords) -> float:
    sel = np.asarray(terminal, dtype=float)
    if coords is not None:
        sel = sel[list(coords)]
    return float(np.linalg.norm(sel - goal))


def _failed_run(exc: Exception, outer: int = 0, total: int = 0) -> SolverRun:
    return SolverRun(
        terminal_state=None, terminal_distance=math.inf, success=False,
        outer_iterations=outer, total_iterations=total, converged=False,
        failure=f"{type(exc).__name__}: {exc}",
    )


def _admm_trial(name: str, horizon: int, xi: np.ndarray, cfg: ExperimentConfig) -> SolverRun:
    goal, coords = experiments.success_spec(name, horizon)
    prob = experiments.build_problem(name, horizon, xi)
    admm_cfg = experiments.default_admm_config(
        name, rho0=cfg.rho, max_outer=cfg.max_outer, eps_primal=cfg.eps_primal
    )
    try:
        state, policy, diag = admm_solve(prob, admm_cfg)
    except (DivergenceError, InfeasibleConstraintError) as exc:
        return _failed_run(exc)

    traj = state.trajectory
    dist = terminal_distance(traj.states[-1], goal, coords)
    run = SolverRun(
        terminal_state=traj.states[-1].tolist(),
        terminal_distance=dist,
        success=dist < SUCCESS_RADIUS,
        outer_iterations=diag["outer_iterations"],
        total_iterations=diag["total_iterations"],
        converged=diag["converged"],
        objective=diag["objective"],
        primal_residuals=diag["primal_residuals"],
        dual_residuals=diag["dual_residuals"],
        reference=state.reference.tolist(),
        states=traj.states.tolist(),
        inputs=traj.inputs.tolist(),
        actions=None if state.actions is None else state.actions.tolist(),
    )
    if name == "linear-circle":
        A = np.asarray(prob.model.params["A"], dtype=float)
        B = np.asarray(prob.model.params["B"], dtype=float)
        N = prob.horizon
        _, _, p_star = solve_ocp_qp(
            np.broadcast_to(A, (N,) + A.shape), np.broadcast_to(B, (N,) + B.shape),
            prob.R_seq, prob.cost.weights, prob.cost.targets, prob.xi,
        )
        run.oracle_objective = float(p_star)
        run.oracle_match = bool(abs(run.objective - p_star) <= 1e-4 * abs(p_star))
    return run


def _baseline_trial(name: str, horizon: int, xi: np.ndarray) -> Optional[SolverRun]:
    cost = experiments.baseline_cost(name)
    if cost is None:
        return None
    model = experiments.make_model(name)
    goal, coords = experiments.success_spec(name, horizon)
    u0 = np.zeros((horizon, model.input_dim))
    try:
        res = ilqr_solve(model, cost, xi, u0, max_iters=BASELINE_MAX_ITERS)
    except DivergenceError as exc:
        return _failed_run(exc)
    dist = terminal_distance(res.trajectory.states[-1], goal, coords)
    return SolverRun(
        terminal_state=res.trajectory.states[-1].tolist(),
        terminal_distance=dist,
        success=dist < SUCCESS_RADIUS,
        outer_iterations=res.iterations_used,
        total_iterations=res.iterations_used,
        converged=res.converged,
        objective=res.cost,
        states=res.trajectory.states.tolist(),
        inputs=res.trajectory.inputs.tolist(),
    )


def _noise_trials(cfg: ExperimentConfig, horizon: int) -> List[TrialRecord]:
    """Stochastic linear runs: one certainty-equivalent solve, many rollouts."""
    name = cfg.experiment
    goal, coords = experiments.success_spec(name, horizon)
    xi = experiments.ic_spec(name)[1]
    prob = experiments.build_problem(name, horizon, xi)
    admm_cfg = experiments.default_admm_config(
        name, rho0=cfg.rho, max_outer=cfg.max_outer, eps_primal=cfg.eps_primal
    )
    policy = solve_stochastic(prob, admm_cfg)
    _, _, diag = admm_solve(prob, admm_cfg)

    records = []
    seeds = np.random.SeedSequence(cfg.seed).spawn(cfg.trials)
    for i in range(cfg.trials):
        traj = simulate_policy(policy, prob.model, noise=prob.noise, seed=seeds[i])
        dist = terminal_distance(traj.states[-1], goal, coords)
        run = SolverRun(
            terminal_state=traj.states[-1].tolist(),
            terminal_distance=dist,
            success=dist < SUCCESS_RADIUS,
            outer_iterations=diag["outer_iterations"],
            total_iterations=diag["total_iterations"],
            converged=diag["converged"],
            objective=diag["objective"],
            primal_residuals=diag["primal_residuals"],
            dual_residuals=diag["dual_residuals"],
            reference=policy.reference.tolist(),
            states=traj.states.tolist(),
            inputs=traj.inputs.tolist(),
        )
        records.append(TrialRecord(trial=i, initial_state=xi.tolist(), admm=run))
    return records


def aggregate(trials: Sequence[TrialRecord]) -> dict:
    """Batch statistics; recomputable exactly from the per-trial records."""
    admm_runs = [t.admm for t in trials]
    agg = {
        "admm_success_rate": success_rate(admm_runs),
        "admm_iterations_mean": float(np.mean([r.total_iterations for r in admm_runs])),
        "admm_iterations_std": float(np.std([r.total_iterations for r in admm_runs])),
        "admm_converged_count": sum(1 for r in admm_runs if r.converged),
    }
    base_runs = [t.baseline for t in trials if t.baseline is not None]
    if base_runs:
        agg["baseline_success_rate"] = success_rate(base_runs)
        agg["baseline_iterations_mean"] = float(np.mean([r.total_iterations for r in base_runs]))
        agg["baseline_iterations_std"] = float(np.std([r.total_iterations for r in base_runs]))
    return agg


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run one seeded benchmark batch: layered solver vs baseline, paired ICs."""
    name = cfg.experiment
    horizon = cfg.resolved_horizon
    goal, coords = experiments.success_spec(name, horizon)

    if name == "linear-noise":
        trials = _noise_trials(cfg, horizon)
    else:
        dist_kind, offset = experiments.ic_spec(name)
        if dist_kind == "fixed":
            ics = np.broadcast_to(offset, (cfg.trials, offset.shape[0])).copy()
        else:
            draws = sample_initial_conditions(dist_kind, cfg.trials, offset.shape[0], cfg.seed)
            ics = draws + offset
        trials = []
        for i in range(cfg.trials):
            xi = ics[i]
            trials.append(TrialRecord(
                trial=i,
                initial_state=xi.tolist(),
                admm=_admm_trial(name, horizon, xi, cfg),
                baseline=_baseline_trial(name, horizon, xi),
            ))

    target = None
    if name in ("linear-circle", "linear-noise"):
        target = experiments.circle_targets(horizon).tolist()
    return ExperimentReport(
        schema=SCHEMA,
        experiment=name,
        config={
            "trials": cfg.trials, "seed": cfg.seed, "horizon": horizon,
            "rho": cfg.rho, "max_outer": cfg.max_outer, "eps_primal": cfg.eps_primal,
        },
        goal=np.asarray(goal, dtype=float).tolist(),
        success_coords=None if coords is None else list(coords),
        target=target,
        overlays=experiments.constraint_overlays(name, horizon),
        trials=trials,
        aggregates=aggregate(trials),
    )


def _run_to_dict(run: Optional[SolverRun]) -> Optional[dict]:
    return None if run is None else dict(run.__dict__)


def report_to_dict(report: ExperimentReport) -> dict:
    d = dict(report.__dict__)
    d["trials"] = [
        {
            "trial": t.trial,
            "initial_state": t.initial_state,
            "admm": _run_to_dict(t.admm),
            "baseline": _run_to_dict(t.baseline),
        }
        for t in report.trials
    ]
    return d


def report_from_dict(d: dict) -> ExperimentReport:
    if d.get("schema") != SCHEMA:
        raise ValueError(f"unsupported report schema {d.get('schema')!r}; expected {SCHEMA}")
    trials = [
        TrialRecord(
            trial=t["trial"],
            initial_state=t["initial_state"],
            admm=SolverRun(**t["admm"]),
            baseline=None if t.get("baseline") is None else SolverRun(**t["baseline"]),
        )
        for t in d["trials"]
    ]
    return ExperimentReport(
        schema=d["schema"], experiment=d["experiment"], config=d["config"],
        goal=d["goal"], success_coords=d.get("success_coords"),
        target=d.get("target"), overlays=d.get("overlays", {}),
        trials=trials, aggregates=d["aggregates"],
    )


def write_report(report: ExperimentReport, path: str, fmt: str = "json"):
    """Serialize a report. JSON is a single document; CSV writes the summary
    to ``path`` plus ``<stem>_trajectories.csv`` and ``<stem>_residuals.csv``."""
    p = Path(path)
    try:
        if fmt == "json":
            p.write_text(json.dumps(report_to_dict(report), indent=1))
        elif fmt == "csv":
            _write_csv(report, p)
        else:
            raise ValueError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"failed to write report to {p}: {exc}") from exc


def read_report(path: str) -> ExperimentReport:
    """Parse a report written by write_report (either format)."""
    p = Path(path)
    if p.suffix == ".json":
        return report_from_dict(json.loads(p.read_text()))
    return _read_csv(p)


def _join(vec) -> str:
    return "" if vec is None else ";".join(repr(float(x)) for x in vec)


def _split(cell: str):
    return None if cell == "" else [float(x) for x in cell.split(";")]


_SUMMARY_FIELDS = [
    "trial", "solver", "initial_state", "terminal_state", "terminal_distance",
    "success", "outer_iterations", "total_iterations", "converged",
    "objective", "failure",
]


def _write_csv(report: ExperimentReport, path: Path):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["schema", report.schema])
        w.writerow(["experiment", report.experiment])
        w.writerow(["goal", _join(report.goal)])
        w.writerow(["success_coords", "" if report.success_coords is None
                    else _join(report.success_coords)])
        w.writerow(_SUMMARY_FIELDS)
        for t in report.trials:
            for solver, run in (("admm", t.admm), ("baseline", t.baseline)):
                if run is None:
                    continue
                w.writerow([
                    t.trial, solver, _join(t.initial_state), _join(run.terminal_state),
                    repr(run.terminal_distance), int(run.success),
                    run.outer_iterations, run.total_iterations, int(run.converged),
                    "" if run.objective is None else repr(run.objective),
                    run.failure or "",
                ])

    with path.with_name(path.stem + "_trajectories.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "solver", "kind", "t", "coord", "value"])
        for t in report.trials:
            for solver, run in (("admm", t.admm), ("baseline", t.baseline)):
                if run is None:
                    continue
                for kind in ("reference", "states", "inputs", "actions"):
                    seq = getattr(run, kind)
                    if seq is None:
                        continue
                    for step_i, vec in enumerate(seq):
                        for ci, val in enumerate(vec):
                            w.writerow([t.trial, solver, kind, step_i, ci, repr(float(val))])

    with path.with_name(path.stem + "_residuals.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "outer", "primal", "dual"])
        for t in report.trials:
            for k, (pr, du) in enumerate(zip(t.admm.primal_residuals, t.admm.dual_residuals)):
                w.writerow([t.trial, k + 1, repr(pr), repr(du)])


def _read_csv(path: Path) -> ExperimentReport:
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "schema" or rows[0][1] != SCHEMA:
        found = rows[0][1] if rows and len(rows[0]) > 1 else None
        raise ValueError(f"unsupported report schema {found!r}; expected {SCHEMA}")
    experiment = rows[1][1]
    goal = _split(rows[2][1]) or []
    coords_cell = rows[3][1]
    coords = None if coords_cell == "" else [int(x) for x in _split(coords_cell)]
    header = rows[4]
    if header != _SUMMARY_FIELDS:
        raise ValueError("summary header does not match the schema")

    by_trial: dict = {}
    for row in rows[5:]:
        rec = dict(zip(_SUMMARY_FIELDS, row))
        run = SolverRun(
            terminal_state=_split(rec["terminal_state"]),
            terminal_distance=float(rec["terminal_distance"]),
            success=bool(int(rec["success"])),
            outer_iterations=int(rec["outer_iterations"]),
            total_iterations=int(rec["total_iterations"]),
            converged=bool(int(rec["converged"])),
            objective=None if rec["objective"] == "" else float(rec["objective"]),
            failure=rec["failure"] or None,
        )
        idx = int(rec["trial"])
        entry = by_trial.setdefault(idx, {"initial_state": _split(rec["initial_state"])})
        entry[rec["solver"]] = run

    trials = [
        TrialRecord(
            trial=idx,
            initial_state=entry["initial_state"],
            admm=entry["admm"],
            baseline=entry.get("baseline"),
        )
        for idx, entry in sorted(by_trial.items())
    ]
    return ExperimentReport(
        schema=SCHEMA, experiment=experiment, config={}, goal=goal,
        success_coords=coords, target=None, overlays={},
        trials=trials, aggregates=aggregate(trials),
    )
