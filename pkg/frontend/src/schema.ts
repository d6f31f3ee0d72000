/**
 * Typed view of the benchmark report files plus the versioned parser.
 *
 * This package consumes only the public JSON schema written by the
 * `layered-ocp` CLI; nothing here links against the solver internals.
 */

import * as fs from 'fs';

export const SUPPORTED_SCHEMA = 'layered-ocp-report/1';

export interface SolverRun {
  terminal_state: number[] | null;
  terminal_distance: number;
  success: boolean;
  outer_iterations: number;
  total_iterations: number;
  converged: boolean;
  objective: number | null;
  primal_residuals: number[];
  dual_residuals: number[];
  reference: number[][] | null;
  states: number[][] | null;
  inputs: number[][] | null;
  actions: number[][] | null;
  failure: string | null;
  oracle_objective: number | null;
  oracle_match: boolean | null;
}

export interface TrialRecord {
  trial: number;
  initial_state: number[];
  admm: SolverRun;
  baseline: SolverRun | null;
}

export interface CorridorOverlay {
  first_coord: number;
  first_window: [number, number];
  second_coord: number;
  second_window: [number, number];
  switch_after: number;
}

export interface ObstacleOverlay {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface Overlays {
  corridor?: CorridorOverlay;
  obstacle?: ObstacleOverlay;
  input_bound?: number;
  target?: string;
}

export interface ReportConfig {
  trials: number;
  seed: number;
  horizon: number;
  rho: number | null;
  max_outer: number | null;
  eps_primal: number | null;
}

export interface ExperimentReport {
  schema: string;
  experiment: string;
  config: ReportConfig;
  goal: number[];
  success_coords: number[] | null;
  target: number[][] | null;
  overlays: Overlays;
  trials: TrialRecord[];
  aggregates: Record<string, number>;
}

/** Report file does not carry the supported schema version. */
export class SchemaError extends Error {
  constructor(found: unknown) {
    super(
      `unsupported report schema ${JSON.stringify(found)}; ` +
        `this renderer reads ${SUPPORTED_SCHEMA}`
    );
    this.name = 'SchemaError';
  }
}

/** Report lacks a field the requested figure kind needs. */
export class MissingFieldError extends Error {
  readonly field: string;

  constructor(field: string, kind: string) {
    super(`report is missing field '${field}' required by figure kind '${kind}'`);
    this.name = 'MissingFieldError';
    this.field = field;
  }
}

export function parseReport(text: string): ExperimentReport {
  const raw = JSON.parse(text);
  if (raw === null || typeof raw !== 'object' || Array.isArray(raw)) {
    throw new SchemaError(undefined);
  }
  if (raw.schema !== SUPPORTED_SCHEMA) {
    throw new SchemaError(raw.schema);
  }
  if (!Array.isArray(raw.trials) || raw.trials.length === 0) {
    throw new MissingFieldError('trials', 'any');
  }
  if (typeof raw.experiment !== 'string') {
    throw new MissingFieldError('experiment', 'any');
  }
  return raw as ExperimentReport;
}

export function loadReport(path: string): ExperimentReport {
  return parseReport(fs.readFileSync(path, 'utf-8'));
}
