#!/usr/bin/env node
/**
 * plots <kind> --in <csv> --out <file.svg|.png> [options]
 *
 * kinds: minutes | timeline | opinions | snapshot-hist | minute-bounds
 * options:
 *   --p <float>        drip probability for minute-bounds reference lines
 *   --window <a,b>     minute window for minute-bounds samples
 *   --field <name>     projected field to aggregate (timeline)
 *   --snapshots <n>    number of sampled times (snapshot-hist)
 *   --title <text>     figure title
 *   --width/--height   canvas size in px
 *
 * Exit codes: 0 ok, 1 bad arguments or schema mismatch.
 */

import { SchemaError } from "./csv";
import { FigureOptions } from "./figures";
import { FigureKind, KINDS, render } from "./render";

function fail(msg: string): never {
  process.stderr.write(`plots: error: ${msg}\n`);
  process.exit(1);
}

export function main(argv: string[]): number {
  const args = [...argv];
  const kind = args.shift();
  if (!kind || kind === "--help" || kind === "-h") {
    process.stderr.write(`usage: plots <${KINDS.join("|")}> --in FILE --out FILE [options]\n`);
    return kind ? 0 : 1;
  }
  if (!KINDS.includes(kind as FigureKind)) {
    fail(`unknown figure kind '${kind}' (expected one of ${KINDS.join(", ")})`);
  }
  let input = "";
  let output = "";
  const options: FigureOptions = {};
  while (args.length > 0) {
    const flag = args.shift()!;
    const value = args.shift();
    if (value === undefined) fail(`flag ${flag} needs a value`);
    switch (flag) {
      case "--in": input = value; break;
      case "--out": output = value; break;
      case "--p": options.p = Number(value); break;
      case "--title": options.title = value; break;
      case "--field": options.field = value; break;
      case "--snapshots": options.snapshots = Number(value); break;
      case "--width": options.width = Number(value); break;
      case "--height": options.height = Number(value); break;
      case "--window": {
        const parts = value.split(",").map(Number);
        if (parts.length !== 2 || parts.some(Number.isNaN)) fail("--window expects 'lo,hi'");
        options.window = [parts[0], parts[1]];
        break;
      }
      default:
        fail(`unknown flag ${flag}`);
    }
  }
  if (!input) fail("--in is required");
  if (!output) fail("--out is required");
  try {
    render({ kind: kind as FigureKind, input, output, options });
  } catch (err) {
    if (err instanceof SchemaError) fail(err.message);
    throw err;
  }
  process.stdout.write(`wrote ${output}\n`);
  return 0;
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
