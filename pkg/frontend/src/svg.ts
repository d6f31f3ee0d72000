/**
 * Small SVG construction helpers: escaping, number formatting, linear and
 * log-decade scales, tick selection, and the shared figure chrome (frame,
 * title, axis labels). Everything returns plain strings.
 */

export interface Margin {
  top: number;
  right: number;
  bottom: number;
  left: number;
}

export interface Frame {
  width: number;
  height: number;
  margin: Margin;
}

export const DEFAULT_FRAME: Frame = {
  width: 720,
  height: 540,
  margin: { top: 50, right: 160, bottom: 55, left: 70 },
};

export function escapeXml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

/** Fixed-precision coordinate so paths stay compact and NaN-free. */
export function fmt(v: number): string {
  if (!Number.isFinite(v)) {
    throw new RangeError(`non-finite coordinate: ${v}`);
  }
  return v.toFixed(2).replace(/\.00$/, '');
}

export interface Scale {
  (v: number): number;
  readonly lo: number;
  readonly hi: number;
}

export function linearScale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const span = hi - lo || 1;
  const f = (v: number) => outLo + ((v - lo) / span) * (outHi - outLo);
  return Object.assign(f, { lo, hi });
}

export function log10Scale(lo: number, hi: number, outLo: number, outHi: number): Scale {
  const llo = Math.log10(lo);
  const lhi = Math.log10(hi);
  const span = lhi - llo || 1;
  const f = (v: number) => outLo + ((Math.log10(v) - llo) / span) * (outHi - outLo);
  return Object.assign(f, { lo, hi });
}

/** Round-numbered ticks covering [lo, hi] with roughly `count` steps. */
export function niceTicks(lo: number, hi: number, count = 5): number[] {
  const span = hi - lo;
  if (span <= 0) {
    return [lo];
  }
  const raw = span / count;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const norm = raw / mag;
  const step = (norm >= 5 ? 10 : norm >= 2 ? 5 : norm >= 1 ? 2 : 1) * mag;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
    ticks.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return ticks;
}

/** Decade ticks 10^k covering [lo, hi], both positive. */
export function decadeTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let k = Math.ceil(Math.log10(lo)); k <= Math.floor(Math.log10(hi)); k++) {
    ticks.push(Math.pow(10, k));
  }
  return ticks.length > 0 ? ticks : [lo];
}

export function tickLabel(v: number): string {
  if (v === 0) {
    return '0';
  }
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) {
    return v.toExponential(0).replace('e', 'e');
  }
  return String(Number(v.toPrecision(4)));
}

export function polyline(
  points: Array<[number, number]>,
  style: string,
  extra = ''
): string {
  const d = points
    .map(([x, y], i) => `${i === 0 ? 'M' : 'L'} ${fmt(x)} ${fmt(y)}`)
    .join(' ');
  return `<path d="${d}" fill="none" ${style} ${extra}/>`;
}

export interface FigureChrome {
  title: string;
  xLabel: string;
  yLabel: string;
}

/** Opens the SVG document and draws the frame, title, and axis labels. */
export function openFigure(frame: Frame, chrome: FigureChrome): string {
  const { width, height, margin } = frame;
  const x0 = margin.left;
  const y0 = margin.top;
  const x1 = width - margin.right;
  const y1 = height - margin.bottom;
  return `<?xml version="1.0" encoding="UTF-8"?>
<svg width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" xmlns="http://www.w3.org/2000/svg">
  <style>
    text { font-family: 'Helvetica Neue', Helvetica, Arial, sans-serif; }
  </style>
  <rect width="${width}" height="${height}" fill="white"/>
  <text x="${width / 2}" y="28" text-anchor="middle" font-size="16" font-weight="bold" fill="#222">${escapeXml(chrome.title)}</text>
  <text x="${(x0 + x1) / 2}" y="${height - 12}" text-anchor="middle" font-size="12" fill="#555">${escapeXml(chrome.xLabel)}</text>
  <text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="12" fill="#555" transform="rotate(-90, 18, ${(y0 + y1) / 2})">${escapeXml(chrome.yLabel)}</text>
  <rect x="${x0}" y="${y0}" width="${x1 - x0}" height="${y1 - y0}" fill="none" stroke="#333" stroke-width="1"/>
`;
}

export function closeFigure(): string {
  return '</svg>\n';
}

export function xTicks(frame: Frame, sx: Scale, values: number[]): string {
  const y1 = frame.height - frame.margin.bottom;
  let out = '';
  for (const v of values) {
    const x = sx(v);
    out += `<line x1="${fmt(x)}" y1="${y1}" x2="${fmt(x)}" y2="${y1 + 5}" stroke="#333" stroke-width="1"/>`;
    out += `<text x="${fmt(x)}" y="${y1 + 18}" text-anchor="middle" font-size="11" fill="#444">${tickLabel(v)}</text>`;
  }
  return out + '\n';
}

export function yTicks(frame: Frame, sy: Scale, values: number[]): string {
  const x0 = frame.margin.left;
  const x1 = frame.width - frame.margin.right;
  let out = '';
  for (const v of values) {
    const y = sy(v);
    out += `<line x1="${x0}" y1="${fmt(y)}" x2="${x1}" y2="${fmt(y)}" stroke="#eee" stroke-width="1"/>`;
    out += `<line x1="${x0 - 5}" y1="${fmt(y)}" x2="${x0}" y2="${fmt(y)}" stroke="#333" stroke-width="1"/>`;
    out += `<text x="${x0 - 9}" y="${fmt(y + 4)}" text-anchor="end" font-size="11" fill="#444">${tickLabel(v)}</text>`;
  }
  return out + '\n';
}

export interface LegendEntry {
  label: string;
  color: string;
  dash?: string;
}

export function legend(frame: Frame, entries: LegendEntry[]): string {
  const x = frame.width - frame.margin.right + 12;
  let y = frame.margin.top + 8;
  let out = '';
  for (const e of entries) {
    out += `<line x1="${x}" y1="${y}" x2="${x + 22}" y2="${y}" stroke="${e.color}" stroke-width="2"${e.dash ? ` stroke-dasharray="${e.dash}"` : ''}/>`;
    out += `<text x="${x + 28}" y="${y + 4}" font-size="11" fill="#333">${escapeXml(e.label)}</text>`;
    y += 20;
  }
  return out + '\n';
}
