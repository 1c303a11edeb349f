import * as fs from "fs";
import * as path from "path";

import { SchemaError, readCsv, requireColumns } from "./csv";
import {
  FigureOptions,
  minuteBoundsFigure,
  minutesFigure,
  opinionsFigure,
  snapshotHistFigure,
  timelineFigure,
} from "./figures";

export type FigureKind = "minutes" | "timeline" | "opinions" | "snapshot-hist" | "minute-bounds";

export const KINDS: FigureKind[] = [
  "minutes", "timeline", "opinions", "snapshot-hist", "minute-bounds",
];

export interface FigureSpec {
  kind: FigureKind;
  input: string;
  output: string;
  options?: FigureOptions;
}

const SCHEMAS: Record<FigureKind, string[]> = {
  "minutes": ["parallel_time", "minute", "fraction"],
  "timeline": ["parallel_time", "key", "count"],
  "opinions": ["parallel_time", "key", "count"],
  "snapshot-hist": ["parallel_time", "key", "count"],
  "minute-bounds": ["minute", "t_plus", "t_01", "t_09"],
};

const BUILDERS: Record<FigureKind, (t: ReturnType<typeof readCsv>, o: FigureOptions) => string> = {
  "minutes": minutesFigure,
  "timeline": timelineFigure,
  "opinions": opinionsFigure,
  "snapshot-hist": snapshotHistFigure,
  "minute-bounds": minuteBoundsFigure,
};

export function buildSvg(spec: FigureSpec): string {
  const table = readCsv(spec.input);
  requireColumns(table, SCHEMAS[spec.kind]);
  return BUILDERS[spec.kind](table, spec.options ?? {});
}

/** Render to the output path; the extension picks SVG or PNG. */
export function render(spec: FigureSpec): void {
  const svg = buildSvg(spec);
  const ext = path.extname(spec.output).toLowerCase();
  fs.mkdirSync(path.dirname(path.resolve(spec.output)), { recursive: true });
  if (ext === ".svg") {
    fs.writeFileSync(spec.output, svg);
    return;
  }
  if (ext === ".png") {
    // resvg is the pinned raster backend; identical SVG bytes give
    // identical PNG bytes for a fixed version.
    const { Resvg } = require("@resvg/resvg-js");
    const png = new Resvg(svg, { fitTo: { mode: "original" } }).render().asPng();
    fs.writeFileSync(spec.output, png);
    return;
  }
  throw new SchemaError(`unsupported output extension '${ext}' (use .svg or .png)`);
}
