/**
 * Figure renderers for benchmark reports.
 *
 * Four kinds: planar trajectory overlays (reference vs executed states),
 * an isometric 3-D variant, velocity/action traces against their bounds,
 * and per-trial primal-residual convergence curves on a log scale.
 */

import {
  ExperimentReport,
  MissingFieldError,
  ObstacleOverlay,
  SolverRun,
  TrialRecord,
} from './schema.js';
import {
  DEFAULT_FRAME,
  Frame,
  decadeTicks,
  escapeXml,
  fmt,
  legend,
  linearScale,
  log10Scale,
  niceTicks,
  openFigure,
  closeFigure,
  polyline,
  xTicks,
  yTicks,
} from './svg.js';

export type FigureKind =
  | 'trajectory-2d'
  | 'trajectory-3d'
  | 'velocity-bounds'
  | 'convergence';

export const FIGURE_KINDS: FigureKind[] = [
  'trajectory-2d',
  'trajectory-3d',
  'velocity-bounds',
  'convergence',
];

export interface PlotJob {
  input: string;
  kind: FigureKind;
  output: string;
  width?: number;
  height?: number;
}

export interface RenderOptions {
  frame?: Frame;
}

const STATE_COLOR = '#1f77b4';
const REFERENCE_COLOR = '#d62728';
const TARGET_COLOR = '#2ca02c';
const BOUND_COLOR = '#d62728';
const FAIL_COLOR = '#ff7f0e';

export function renderFigure(
  report: ExperimentReport,
  kind: FigureKind,
  opts: RenderOptions = {}
): string {
  const frame = opts.frame ?? DEFAULT_FRAME;
  switch (kind) {
    case 'trajectory-2d':
      return renderTrajectory2d(report, frame);
    case 'trajectory-3d':
      return renderTrajectory3d(report, frame);
    case 'velocity-bounds':
      return renderVelocityBounds(report, frame);
    case 'convergence':
      return renderConvergence(report, frame);
  }
}

/** Kinds whose required fields the report actually carries. */
export function applicableKinds(report: ExperimentReport): FigureKind[] {
  const kinds: FigureKind[] = ['trajectory-2d', 'convergence'];
  if ((report.success_coords?.length ?? 0) >= 3) {
    kinds.splice(1, 0, 'trajectory-3d');
  }
  if (report.trials.some((t) => t.admm.actions != null)) {
    kinds.splice(kinds.length - 1, 0, 'velocity-bounds');
  }
  return kinds;
}

/** Count of reference points strictly inside the open keep-out rectangle. */
export function referencesInsideObstacle(report: ExperimentReport): number {
  const rect = report.overlays.obstacle;
  if (rect == null) {
    throw new MissingFieldError('overlays.obstacle', 'trajectory-2d');
  }
  let inside = 0;
  for (const trial of report.trials) {
    for (const p of trial.admm.reference ?? []) {
      if (
        p[0] > rect.x_min && p[0] < rect.x_max &&
        p[1] > rect.y_min && p[1] < rect.y_max
      ) {
        inside += 1;
      }
    }
  }
  return inside;
}

export function allReferencesOutside(report: ExperimentReport): boolean {
  return referencesInsideObstacle(report) === 0;
}

interface Bounds {
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

function growBounds(b: Bounds, x: number, y: number): void {
  b.xMin = Math.min(b.xMin, x);
  b.xMax = Math.max(b.xMax, x);
  b.yMin = Math.min(b.yMin, y);
  b.yMax = Math.max(b.yMax, y);
}

function emptyBounds(): Bounds {
  return { xMin: Infinity, xMax: -Infinity, yMin: Infinity, yMax: -Infinity };
}

/** Pads and equalizes the data window so one unit measures the same on both axes. */
function equalAspectScales(frame: Frame, b: Bounds) {
  const { width, height, margin } = frame;
  const w = width - margin.left - margin.right;
  const h = height - margin.top - margin.bottom;
  const pad = 0.08;
  let dx = (b.xMax - b.xMin) || 1;
  let dy = (b.yMax - b.yMin) || 1;
  dx *= 1 + 2 * pad;
  dy *= 1 + 2 * pad;
  const unit = Math.max(dx / w, dy / h);
  const cx = (b.xMin + b.xMax) / 2;
  const cy = (b.yMin + b.yMax) / 2;
  const sx = linearScale(cx - (unit * w) / 2, cx + (unit * w) / 2, margin.left, width - margin.right);
  const sy = linearScale(cy - (unit * h) / 2, cy + (unit * h) / 2, height - margin.bottom, margin.top);
  return { sx, sy };
}

function trialStates(trial: TrialRecord): number[][] | null {
  return trial.admm.states;
}

function pickColumns(rows: number[][], cols: [number, number]): Array<[number, number]> {
  return rows.map((r) => [r[cols[0]], r[cols[1]]]);
}

/** Plot columns: the success coordinates when given, else the first two. */
function planarCoords(report: ExperimentReport): [number, number] {
  const sc = report.success_coords;
  if (sc != null && sc.length >= 2) {
    return [sc[0], sc[1]];
  }
  return [0, 1];
}

/**
 * Reference rows live in output space: full-order references share the state
 * columns, low-order references carry only the plotted coordinates.
 */
function referenceColumns(
  reference: number[][],
  states: number[][] | null,
  coords: [number, number]
): [number, number] {
  if (states != null && reference[0].length === states[0].length) {
    return coords;
  }
  return [0, 1];
}

function goalMarker(x: number, y: number): string {
  const r = 6;
  return (
    `<line x1="${fmt(x - r)}" y1="${fmt(y - r)}" x2="${fmt(x + r)}" y2="${fmt(y + r)}" stroke="#111" stroke-width="2"/>` +
    `<line x1="${fmt(x - r)}" y1="${fmt(y + r)}" x2="${fmt(x + r)}" y2="${fmt(y - r)}" stroke="#111" stroke-width="2"/>`
  );
}

function renderTrajectory2d(report: ExperimentReport, frame: Frame): string {
  const coords = planarCoords(report);
  const bounds = emptyBounds();

  const withStates = report.trials.filter((t) => trialStates(t) != null);
  if (withStates.length === 0) {
    throw new MissingFieldError('admm.states', 'trajectory-2d');
  }
  for (const trial of withStates) {
    for (const [x, y] of pickColumns(trialStates(trial)!, coords)) {
      growBounds(bounds, x, y);
    }
    const ref = trial.admm.reference;
    if (ref != null) {
      const rc = referenceColumns(ref, trialStates(trial), coords);
      for (const [x, y] of pickColumns(ref, rc)) {
        growBounds(bounds, x, y);
      }
    }
  }
  if (report.target != null) {
    for (const [x, y] of pickColumns(report.target, [0, 1])) {
      growBounds(bounds, x, y);
    }
  }
  // goal entries align with success_coords picks (or the full state when
  // success_coords is null, in which case the plot coords are [0, 1] too)
  const goal: [number, number] = [report.goal[0], report.goal[1]];
  growBounds(bounds, goal[0], goal[1]);
  const obstacle = report.overlays.obstacle;
  if (obstacle != null) {
    growBounds(bounds, obstacle.x_min, obstacle.y_min);
    growBounds(bounds, obstacle.x_max, obstacle.y_max);
  }

  const { sx, sy } = equalAspectScales(frame, bounds);
  let svg = openFigure(frame, {
    title: `${report.experiment}: reference vs executed trajectories`,
    xLabel: `coordinate ${coords[0]}`,
    yLabel: `coordinate ${coords[1]}`,
  });
  svg += xTicks(frame, sx, niceTicks(sx.lo, sx.hi));
  svg += yTicks(frame, sy, niceTicks(sy.lo, sy.hi));
  svg += overlayShapes(report, frame, sx, sy);

  const thin = withStates.length > 5;
  const lineAlpha = thin ? ' stroke-opacity="0.6"' : '';
  for (const trial of withStates) {
    const ref = trial.admm.reference;
    if (ref != null) {
      const rc = referenceColumns(ref, trialStates(trial), coords);
      svg += polyline(
        pickColumns(ref, rc).map(([x, y]) => [sx(x), sy(y)] as [number, number]),
        `stroke="${REFERENCE_COLOR}" stroke-width="1.3" stroke-dasharray="5,3"${lineAlpha}`,
        'class="reference-curve"'
      );
    }
    svg += polyline(
      pickColumns(trialStates(trial)!, coords).map(([x, y]) => [sx(x), sy(y)] as [number, number]),
      `stroke="${STATE_COLOR}" stroke-width="1.6"${lineAlpha}`,
      'class="state-curve"'
    );
  }

  if (report.target != null) {
    svg += polyline(
      pickColumns(report.target, [0, 1]).map(([x, y]) => [sx(x), sy(y)] as [number, number]),
      `stroke="${TARGET_COLOR}" stroke-width="1.2"`,
      'class="target-curve"'
    );
  }
  if (report.success_coords?.length === 2) {
    const r = Math.abs(sx(goal[0] + 0.5) - sx(goal[0]));
    svg += `<circle cx="${fmt(sx(goal[0]))}" cy="${fmt(sy(goal[1]))}" r="${fmt(r)}" fill="none" stroke="#888" stroke-dasharray="3,3"/>`;
  }
  svg += goalMarker(sx(goal[0]), sy(goal[1]));

  const entries = [
    { label: 'executed state', color: STATE_COLOR },
    { label: 'reference', color: REFERENCE_COLOR, dash: '5,3' },
  ];
  if (report.target != null) {
    entries.push({ label: 'target', color: TARGET_COLOR });
  }
  svg += legend(frame, entries);

  if (obstacle != null) {
    const inside = referencesInsideObstacle(report);
    const note =
      inside === 0
        ? 'keep-out clear: all reference points outside'
        : `keep-out VIOLATED: ${inside} reference points inside`;
    svg += `<text x="${frame.margin.left}" y="${frame.height - 34}" font-size="11" fill="${inside === 0 ? '#2ca02c' : '#d62728'}" class="keepout-note">${escapeXml(note)}</text>`;
  }
  return svg + closeFigure();
}

function overlayShapes(
  report: ExperimentReport,
  frame: Frame,
  sx: (v: number) => number,
  sy: (v: number) => number
): string {
  let svg = '';
  const plotX0 = frame.margin.left;
  const plotX1 = frame.width - frame.margin.right;
  const plotY0 = frame.margin.top;
  const plotY1 = frame.height - frame.margin.bottom;

  const corridor = report.overlays.corridor;
  if (corridor != null) {
    // Two one-coordinate windows: a band on the first coordinate that binds
    // through the switch step, then a band on the second coordinate.
    const [aLo, aHi] = corridor.first_window;
    const x0 = Math.min(sx(aLo), sx(aHi));
    const x1 = Math.max(sx(aLo), sx(aHi));
    svg += `<rect x="${fmt(x0)}" y="${plotY0}" width="${fmt(x1 - x0)}" height="${plotY1 - plotY0}" fill="#2ca02c" fill-opacity="0.08" stroke="#2ca02c" stroke-dasharray="4,4" class="corridor-band"/>`;
    const [bLo, bHi] = corridor.second_window;
    const y0 = Math.min(sy(bLo), sy(bHi));
    const y1 = Math.max(sy(bLo), sy(bHi));
    svg += `<rect x="${plotX0}" y="${fmt(y0)}" width="${plotX1 - plotX0}" height="${fmt(y1 - y0)}" fill="#2ca02c" fill-opacity="0.08" stroke="#2ca02c" stroke-dasharray="4,4" class="corridor-band"/>`;
    svg += `<text x="${fmt((x0 + x1) / 2)}" y="${plotY0 + 14}" text-anchor="middle" font-size="10" fill="#2ca02c">t ≤ ${corridor.switch_after}</text>`;
    svg += `<text x="${plotX1 - 6}" y="${fmt((y0 + y1) / 2)}" text-anchor="end" font-size="10" fill="#2ca02c">t &gt; ${corridor.switch_after}</text>`;
  }

  const obstacle = report.overlays.obstacle;
  if (obstacle != null) {
    svg += obstacleRect(obstacle, sx, sy);
  }
  return svg;
}

function obstacleRect(
  rect: ObstacleOverlay,
  sx: (v: number) => number,
  sy: (v: number) => number
): string {
  const x = sx(rect.x_min);
  const y = sy(rect.y_max);
  const w = sx(rect.x_max) - sx(rect.x_min);
  const h = sy(rect.y_min) - sy(rect.y_max);
  return `<rect x="${fmt(x)}" y="${fmt(y)}" width="${fmt(w)}" height="${fmt(h)}" fill="#d62728" fill-opacity="0.15" stroke="#d62728" class="obstacle-rect"/>`;
}

function renderTrajectory3d(report: ExperimentReport, frame: Frame): string {
  const sc = report.success_coords;
  if (sc == null || sc.length < 3) {
    throw new MissingFieldError('success_coords', 'trajectory-3d');
  }
  const cols: [number, number, number] = [sc[0], sc[1], sc[2]];
  const withStates = report.trials.filter((t) => trialStates(t) != null);
  if (withStates.length === 0) {
    throw new MissingFieldError('admm.states', 'trajectory-3d');
  }

  // Isometric projection onto the drawing plane.
  const cos30 = Math.cos(Math.PI / 6);
  const sin30 = Math.sin(Math.PI / 6);
  const project = (p: number[], pick: [number, number, number]): [number, number] => {
    const a = p[pick[0]];
    const b = p[pick[1]];
    const c = p[pick[2]];
    return [(a - b) * cos30, (a + b) * sin30 - c];
  };

  const bounds = emptyBounds();
  const goalXY = project(report.goal, [0, 1, 2]);
  growBounds(bounds, goalXY[0], goalXY[1]);
  for (const trial of withStates) {
    for (const row of trialStates(trial)!) {
      const [x, y] = project(row, cols);
      growBounds(bounds, x, y);
    }
    const ref = trial.admm.reference;
    if (ref != null) {
      const rc: [number, number, number] =
        ref[0].length === trialStates(trial)![0].length ? cols : [0, 1, 2];
      for (const row of ref) {
        const [x, y] = project(row, rc);
        growBounds(bounds, x, y);
      }
    }
  }

  const { sx, sy } = equalAspectScales(frame, bounds);
  // The projected plane mixes the three coordinates, so the flipped y axis
  // of the screen is folded into the scale rather than the projection.
  let svg = openFigure(frame, {
    title: `${report.experiment}: trajectories (isometric)`,
    xLabel: `coordinates ${cols[0]},${cols[1]} (projected)`,
    yLabel: `coordinate ${cols[2]} (projected up)`,
  });

  const thin = withStates.length > 5;
  const lineAlpha = thin ? ' stroke-opacity="0.6"' : '';
  for (const trial of withStates) {
    const ref = trial.admm.reference;
    if (ref != null) {
      const rc: [number, number, number] =
        ref[0].length === trialStates(trial)![0].length ? cols : [0, 1, 2];
      svg += polyline(
        ref.map((row) => {
          const [x, y] = project(row, rc);
          return [sx(x), sy(y)] as [number, number];
        }),
        `stroke="${REFERENCE_COLOR}" stroke-width="1.3" stroke-dasharray="5,3"${lineAlpha}`,
        'class="reference-curve"'
      );
    }
    svg += polyline(
      trialStates(trial)!.map((row) => {
        const [x, y] = project(row, cols);
        return [sx(x), sy(y)] as [number, number];
      }),
      `stroke="${STATE_COLOR}" stroke-width="1.6"${lineAlpha}`,
      'class="state-curve"'
    );
  }
  svg += goalMarker(sx(goalXY[0]), sy(goalXY[1]));
  svg += legend(frame, [
    { label: 'executed state', color: STATE_COLOR },
    { label: 'reference', color: REFERENCE_COLOR, dash: '5,3' },
  ]);
  return svg + closeFigure();
}

function renderVelocityBounds(report: ExperimentReport, frame: Frame): string {
  const withActions = report.trials.filter((t) => t.admm.actions != null);
  if (withActions.length === 0) {
    throw new MissingFieldError('admm.actions', 'velocity-bounds');
  }
  const bound = report.overlays.input_bound ?? null;

  let vMin = Infinity;
  let vMax = -Infinity;
  let steps = 0;
  for (const trial of withActions) {
    const acts = trial.admm.actions!;
    steps = Math.max(steps, acts.length);
    for (const row of acts) {
      for (const v of row) {
        vMin = Math.min(vMin, v);
        vMax = Math.max(vMax, v);
      }
    }
  }
  if (bound != null) {
    vMin = Math.min(vMin, -bound);
    vMax = Math.max(vMax, bound);
  }
  const pad = 0.08 * (vMax - vMin || 1);
  const sx = linearScale(0, Math.max(steps - 1, 1), frame.margin.left, frame.width - frame.margin.right);
  const sy = linearScale(vMin - pad, vMax + pad, frame.height - frame.margin.bottom, frame.margin.top);

  let svg = openFigure(frame, {
    title: `${report.experiment}: input actions vs bound`,
    xLabel: 'timestep',
    yLabel: 'action value',
  });
  const stepTicks = [...new Set(niceTicks(0, Math.max(steps - 1, 1), 8).map((v) => Math.round(v)))];
  svg += xTicks(frame, sx, stepTicks);
  svg += yTicks(frame, sy, niceTicks(sy.lo, sy.hi));

  const componentColors = ['#1f77b4', '#ff7f0e', '#2ca02c', '#9467bd'];
  const nComponents = withActions[0].admm.actions![0].length;
  for (const trial of withActions) {
    const acts = trial.admm.actions!;
    for (let c = 0; c < acts[0].length; c++) {
      svg += polyline(
        acts.map((row, t) => [sx(t), sy(row[c])] as [number, number]),
        `stroke="${componentColors[c % componentColors.length]}" stroke-width="1.2" stroke-opacity="0.65"`,
        'class="action-curve"'
      );
    }
  }
  if (bound != null) {
    for (const b of [bound, -bound]) {
      svg += `<line x1="${frame.margin.left}" y1="${fmt(sy(b))}" x2="${frame.width - frame.margin.right}" y2="${fmt(sy(b))}" stroke="${BOUND_COLOR}" stroke-width="1.5" stroke-dasharray="6,4" class="bound-line"/>`;
      svg += `<text x="${frame.width - frame.margin.right - 4}" y="${fmt(sy(b) - 5)}" text-anchor="end" font-size="10" fill="${BOUND_COLOR}">${b > 0 ? '+' : ''}${b}</text>`;
    }
  }
  const entries = [];
  for (let c = 0; c < nComponents; c++) {
    entries.push({ label: `action[${c}]`, color: componentColors[c % componentColors.length] });
  }
  if (bound != null) {
    entries.push({ label: `bound ±${bound}`, color: BOUND_COLOR, dash: '6,4' });
  }
  svg += legend(frame, entries);
  return svg + closeFigure();
}

function renderConvergence(report: ExperimentReport, frame: Frame): string {
  const withResiduals = report.trials.filter(
    (t) => (t.admm.primal_residuals?.length ?? 0) > 0
  );
  if (withResiduals.length === 0) {
    throw new MissingFieldError('admm.primal_residuals', 'convergence');
  }
  const threshold = report.config.eps_primal ?? 1e-2;

  const FLOOR = 1e-16;
  let yLo = threshold;
  let yHi = threshold;
  let xMax = 1;
  for (const trial of withResiduals) {
    for (const r of trial.admm.primal_residuals) {
      const v = Math.max(r * r, FLOOR);
      yLo = Math.min(yLo, v);
      yHi = Math.max(yHi, v);
    }
    xMax = Math.max(xMax, trial.admm.primal_residuals.length);
  }
  yLo /= 3;
  yHi *= 3;

  const sx = linearScale(1, xMax, frame.margin.left, frame.width - frame.margin.right);
  const sy = log10Scale(yLo, yHi, frame.height - frame.margin.bottom, frame.margin.top);

  let svg = openFigure(frame, {
    title: `${report.experiment}: consensus residual convergence`,
    xLabel: 'outer iteration',
    yLabel: 'squared primal residual',
  });
  const iterTicks = [...new Set(niceTicks(1, xMax, 8).map((v) => Math.round(v)))].filter((v) => v >= 1);
  svg += xTicks(frame, sx, iterTicks);
  svg += yTicks(frame, sy, decadeTicks(yLo, yHi));

  for (const trial of withResiduals) {
    const ok = trial.admm.converged;
    svg += polyline(
      trial.admm.primal_residuals.map(
        (r, i) => [sx(i + 1), sy(Math.max(r * r, FLOOR))] as [number, number]
      ),
      `stroke="${ok ? STATE_COLOR : FAIL_COLOR}" stroke-width="1.2" stroke-opacity="0.7"`,
      'class="trial-curve"'
    );
  }
  svg += `<line x1="${frame.margin.left}" y1="${fmt(sy(threshold))}" x2="${frame.width - frame.margin.right}" y2="${fmt(sy(threshold))}" stroke="#333" stroke-width="1.2" stroke-dasharray="6,4" class="threshold-line"/>`;
  svg += `<text x="${frame.width - frame.margin.right - 4}" y="${fmt(sy(threshold) - 5)}" text-anchor="end" font-size="10" fill="#333">stopping threshold</text>`;
  svg += legend(frame, [
    { label: 'converged trial', color: STATE_COLOR },
    { label: 'capped trial', color: FAIL_COLOR },
  ]);
  return svg + closeFigure();
}
