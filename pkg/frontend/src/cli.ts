/**
 * Command line entry point.
 *
 *   plots render --in report.json --kind trajectory-2d --out fig.svg
 *
 * Exit codes follow the benchmark CLI convention: 0 on success, 1 when a
 * report cannot be read or rendered, 2 on usage errors.
 */

import * as fs from 'node:fs';
import * as path from 'node:path';
import { fileURLToPath } from 'node:url';
import { parseArgs } from 'node:util';

import { FIGURE_KINDS, FigureKind, renderFigure } from './figures.js';
import { MissingFieldError, SchemaError, loadReport } from './schema.js';
import { DEFAULT_FRAME } from './svg.js';

const USAGE = `usage: plots render --in <report.json> --kind <kind> --out <figure.svg>
                    [--width <px>] [--height <px>]
kinds: ${FIGURE_KINDS.join(', ')}`;

const MIN_SIZE = 320;

export function main(argv: string[]): number {
  if (argv.length === 0) {
    console.error(USAGE);
    return 2;
  }
  const [command, ...rest] = argv;
  if (command !== 'render') {
    console.error(`unknown command '${command}'\n${USAGE}`);
    return 2;
  }

  let values: { in?: string; kind?: string; out?: string; width?: string; height?: string };
  try {
    ({ values } = parseArgs({
      args: rest,
      options: {
        in: { type: 'string' },
        kind: { type: 'string' },
        out: { type: 'string' },
        width: { type: 'string' },
        height: { type: 'string' },
      },
    }));
  } catch (err) {
    console.error(`${(err as Error).message}\n${USAGE}`);
    return 2;
  }

  const input = values.in;
  const kind = values.kind;
  const output = values.out;
  if (input == null || kind == null || output == null) {
    console.error(`--in, --kind and --out are all required\n${USAGE}`);
    return 2;
  }
  if (!FIGURE_KINDS.includes(kind as FigureKind)) {
    console.error(`unknown figure kind '${kind}'; expected one of ${FIGURE_KINDS.join(', ')}`);
    return 2;
  }

  const frame = { ...DEFAULT_FRAME };
  for (const [flag, raw] of [['width', values.width], ['height', values.height]] as const) {
    if (raw == null) continue;
    const px = Number(raw);
    if (!Number.isInteger(px) || px < MIN_SIZE) {
      console.error(`--${flag} must be an integer of at least ${MIN_SIZE}, got '${raw}'`);
      return 2;
    }
    frame[flag] = px;
  }

  try {
    const report = loadReport(input);
    const svg = renderFigure(report, kind as FigureKind, { frame });
    fs.mkdirSync(path.dirname(path.resolve(output)), { recursive: true });
    fs.writeFileSync(output, svg, 'utf-8');
    console.log(`wrote ${output} (${kind}, experiment=${report.experiment})`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || err instanceof MissingFieldError) {
      console.error(err.message);
    } else if (err instanceof Error) {
      console.error(`failed to render: ${err.message}`);
    } else {
      console.error(`failed to render: ${String(err)}`);
    }
    return 1;
  }
}

const invokedDirectly =
  typeof process.argv[1] === 'string' &&
  path.resolve(process.argv[1]) === fileURLToPath(import.meta.url);

if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
