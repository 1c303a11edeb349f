/** The five figure kinds, each a pure function CSV tables -> SVG string. */

import { SchemaError, Table, numericColumn, column, readProjection } from "./csv";
import { Chart, PALETTE } from "./svg";

export interface FigureOptions {
  title?: string;
  width?: number;
  height?: number;
  p?: number;          // drip probability (minute-bounds reference lines)
  window?: [number, number];
  snapshots?: number;  // snapshot-hist: number of sampled times
  field?: string;      // timeline: projected field to aggregate on
}

function chart(opts: FigureOptions): Chart {
  return new Chart(opts.width ?? 860, opts.height ?? 480);
}

/** minutes.csv: distribution of the minute field at a sample of times. */
export function minutesFigure(table: Table, opts: FigureOptions): string {
  const t = numericColumn(table, "parallel_time");
  const minute = numericColumn(table, "minute");
  const frac = numericColumn(table, "fraction");
  const times = [...new Set(t)].sort((a, b) => a - b);
  const want = Math.min(8, times.length);
  const picked: number[] = [];
  for (let i = 0; i < want; i++) {
    picked.push(times[Math.floor((i * (times.length - 1)) / Math.max(1, want - 1))]);
  }
  const sampled = [...new Set(picked)];

  const maxMinute = Math.max(0, ...minute);
  const maxFrac = Math.max(0, ...frac);
  const c = chart(opts);
  c.domain(0, maxMinute, 0, maxFrac * 1.08 || 1);
  c.title(opts.title ?? "clock minute distribution");
  c.axes("minute", "fraction of agents");
  const legend: Array<[string, string]> = [];
  sampled.forEach((time, idx) => {
    const pts: Array<[number, number]> = [];
    for (let row = 0; row < t.length; row++) {
      if (t[row] === time) pts.push([minute[row], frac[row]]);
    }
    pts.sort((a, b) => a[0] - b[0]);
    const color = PALETTE[idx % PALETTE.length];
    c.polyline(pts, color);
    legend.push([`t=${time.toFixed(2)}`, color]);
  });
  c.legend(legend);
  return c.toString();
}

function keyParts(key: string): string[] {
  return key.split("|");
}

/** timeline.csv: counts per projected key over time, aggregated on one field. */
export function timelineFigure(table: Table, opts: FigureOptions): string {
  const t = numericColumn(table, "parallel_time");
  const keys = column(table, "key");
  const counts = numericColumn(table, "count");

  const projection = readProjection(table.file);
  let fieldIdx = -1;
  let fieldName = opts.field ?? "";
  if (fieldName) {
    if (!projection) {
      throw new SchemaError(`${table.file}: --field needs a sibling meta.json with the projection`);
    }
    fieldIdx = projection.indexOf(fieldName);
    if (fieldIdx < 0) {
      throw new SchemaError(`${table.file}: projection ${JSON.stringify(projection)} has no field '${fieldName}'`);
    }
  } else if (projection && projection.includes("phase")) {
    fieldIdx = projection.indexOf("phase");
    fieldName = "phase";
  }

  const agg = new Map<string, Map<number, number>>();
  for (let row = 0; row < t.length; row++) {
    const label = fieldIdx >= 0 ? keyParts(keys[row])[fieldIdx] : keys[row];
    let series = agg.get(label);
    if (!series) {
      series = new Map();
      agg.set(label, series);
    }
    series.set(t[row], (series.get(t[row]) ?? 0) + counts[row]);
  }
  const labels = [...agg.keys()].sort((a, b) => {
    const na = Number(a);
    const nb = Number(b);
    if (!Number.isNaN(na) && !Number.isNaN(nb)) return na - nb;
    return a < b ? -1 : a > b ? 1 : 0;
  }).slice(0, 12);

  const tMax = Math.max(0, ...t);
  let yMax = 1;
  for (const label of labels) {
    for (const v of agg.get(label)!.values()) yMax = Math.max(yMax, v);
  }
  const c = chart(opts);
  c.domain(0, tMax, 0, yMax * 1.08);
  c.title(opts.title ?? (fieldName ? `${fieldName} counts over time` : "state counts over time"));
  c.axes("parallel time", "count");
  const legend: Array<[string, string]> = [];
  labels.forEach((label, idx) => {
    const series = agg.get(label)!;
    const pts = [...series.entries()].sort((a, b) => a[0] - b[0]) as Array<[number, number]>;
    const color = PALETTE[idx % PALETTE.length];
    c.polyline(pts, color);
    legend.push([`${fieldName || "key"}=${label}`, color]);
  });
  c.legend(legend);
  return c.toString();
}

/** timeline.csv with an 'opinion' field: majority/minority/difference/unbiased
 * counts on a log scale. */
export function opinionsFigure(table: Table, opts: FigureOptions): string {
  const t = numericColumn(table, "parallel_time");
  const keys = column(table, "key");
  const counts = numericColumn(table, "count");
  const projection = readProjection(table.file);
  if (!projection) {
    throw new SchemaError(`${table.file}: opinions figure needs a sibling meta.json with the projection`);
  }
  const opIdx = projection.indexOf("opinion");
  if (opIdx < 0) {
    throw new SchemaError(`${table.file}: projection ${JSON.stringify(projection)} has no field 'opinion'`);
  }
  const roleIdx = projection.indexOf("role");

  const plus = new Map<number, number>();
  const minus = new Map<number, number>();
  const zero = new Map<number, number>();
  const bump = (m: Map<number, number>, time: number, v: number) =>
    m.set(time, (m.get(time) ?? 0) + v);
  for (let row = 0; row < t.length; row++) {
    const parts = keyParts(keys[row]);
    if (roleIdx >= 0 && parts[roleIdx] !== "Main") continue;
    const op = Number(parts[opIdx]);
    if (op > 0) bump(plus, t[row], counts[row]);
    else if (op < 0) bump(minus, t[row], counts[row]);
    else bump(zero, t[row], counts[row]);
  }
  const times = [...new Set(t)].sort((a, b) => a - b);
  const last = times[times.length - 1];
  const majorityIsPlus = (plus.get(last) ?? 0) >= (minus.get(last) ?? 0);
  const maj = majorityIsPlus ? plus : minus;
  const min = majorityIsPlus ? minus : plus;

  const series = (m: Map<number, number>): Array<[number, number]> =>
    times.map((time): [number, number] => [time, m.get(time) ?? 0])
         .filter(([, v]) => v > 0);
  const diff: Array<[number, number]> = times
    .map((time): [number, number] =>
      [time, Math.abs((maj.get(time) ?? 0) - (min.get(time) ?? 0))])
    .filter(([, v]) => v > 0);

  let yMax = 1;
  for (const m of [plus, minus, zero]) {
    for (const v of m.values()) yMax = Math.max(yMax, v);
  }
  const c = chart(opts);
  c.domain(0, last, 0.5, yMax * 1.4, true);
  c.title(opts.title ?? "Main opinions (log scale)");
  c.axes("parallel time", "count");
  c.polyline(series(maj), PALETTE[0], 2);
  c.polyline(series(min), PALETTE[1], 2);
  c.polyline(diff, PALETTE[2], 1.5, "5,3");
  c.polyline(series(zero), PALETTE[7], 1.5);
  c.legend([
    [`majority (${majorityIsPlus ? "+1" : "-1"})`, PALETTE[0]],
    [`minority (${majorityIsPlus ? "-1" : "+1"})`, PALETTE[1]],
    ["|difference|", PALETTE[2]],
    ["unbiased (0)", PALETTE[7]],
  ]);
  return c.toString();
}

/** timeline.csv with 'opinion' and 'exponent': biased-agent histograms over
 * exponent at a few sampled times. */
export function snapshotHistFigure(table: Table, opts: FigureOptions): string {
  const t = numericColumn(table, "parallel_time");
  const keys = column(table, "key");
  const counts = numericColumn(table, "count");
  const projection = readProjection(table.file);
  if (!projection) {
    throw new SchemaError(`${table.file}: snapshot-hist needs a sibling meta.json with the projection`);
  }
  for (const f of ["opinion", "exponent"]) {
    if (!projection.includes(f)) {
      throw new SchemaError(`${table.file}: projection ${JSON.stringify(projection)} has no field '${f}'`);
    }
  }
  const opIdx = projection.indexOf("opinion");
  const exIdx = projection.indexOf("exponent");

  const times = [...new Set(t)].sort((a, b) => a - b);
  const want = Math.min(opts.snapshots ?? 6, times.length);
  const sampled: number[] = [];
  for (let i = 0; i < want; i++) {
    sampled.push(times[Math.floor((i * (times.length - 1)) / Math.max(1, want - 1))]);
  }

  let exLo = 0;
  let exHi = 0;
  let yMax = 1;
  const hist = new Map<number, Map<string, number>>();  // time -> "op:exp" -> count
  for (let row = 0; row < t.length; row++) {
    const parts = keyParts(keys[row]);
    const op = Number(parts[opIdx]);
    if (op === 0) continue;
    const ex = Number(parts[exIdx]);
    if (!sampled.includes(t[row])) continue;
    let m = hist.get(t[row]);
    if (!m) {
      m = new Map();
      hist.set(t[row], m);
    }
    const key = `${op}:${ex}`;
    const v = (m.get(key) ?? 0) + counts[row];
    m.set(key, v);
    exLo = Math.min(exLo, ex);
    exHi = Math.max(exHi, ex);
    yMax = Math.max(yMax, v);
  }

  const cols = Math.min(3, Math.max(1, sampled.length));
  const rows = Math.ceil(sampled.length / cols);
  const cellW = 300;
  const cellH = 220;
  const parts: string[] = [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${cols * cellW}" height="${rows * cellH + 28}" viewBox="0 0 ${cols * cellW} ${rows * cellH + 28}">`,
    `<rect width="${cols * cellW}" height="${rows * cellH + 28}" fill="white"/>`,
    `<text x="${(cols * cellW) / 2}" y="18" text-anchor="middle" font-size="14" font-family="sans-serif" font-weight="bold">${opts.title ?? "biased-agent exponent snapshots"}</text>`,
  ];
  sampled.forEach((time, idx) => {
    const ox = (idx % cols) * cellW;
    const oy = 28 + Math.floor(idx / cols) * cellH;
    const sub = new Chart(cellW, cellH, { top: 24, right: 10, bottom: 32, left: 46 });
    sub.domain(exLo - 1, exHi + 1, 0, yMax * 1.1);
    sub.title(`t=${time.toFixed(2)}`);
    sub.axes("exponent", "count");
    const m = hist.get(time) ?? new Map<string, number>();
    for (const [key, v] of [...m.entries()].sort()) {
      const [op, ex] = key.split(":").map(Number);
      if (op > 0) sub.bar(ex - 0.45, ex, v, PALETTE[0]);
      else sub.bar(ex, ex + 0.45, v, PALETTE[1]);
    }
    const inner = sub.toString().split("\n").slice(2, -2).join("\n");
    parts.push(`<g transform="translate(${ox} ${oy})">${inner}</g>`);
  });
  parts.push("</svg>", "");
  return parts.join("\n");
}

/** crossings.csv: per-minute lengths t01[i+1]-t01[i] with the proven
 * reference bounds overlaid. */
export function minuteBoundsFigure(table: Table, opts: FigureOptions): string {
  const minute = numericColumn(table, "minute");
  const t01 = numericColumn(table, "t_01");
  const p = opts.p ?? 1.0;
  const [w0, w1] = opts.window ?? [
    minute[0] ?? 0,
    (minute[minute.length - 1] ?? 1) - 1,
  ];

  const t01ByMinute = new Map<number, number>();
  for (let i = 0; i < minute.length; i++) {
    if (Number.isFinite(t01[i])) t01ByMinute.set(minute[i], t01[i]);
  }
  const samples: Array<[number, number]> = [];
  for (let i = w0; i <= w1; i++) {
    const a = t01ByMinute.get(i);
    const b = t01ByMinute.get(i + 1);
    if (a !== undefined && b !== undefined) samples.push([i, b - a]);
  }
  if (samples.length === 0) {
    throw new SchemaError(`${table.file}: no finite t_01 pairs inside window [${w0}, ${w1}]`);
  }
  const upper = 2.11 + 0.5 * Math.log(1 / p);
  const lower = Math.max(0.45, 0.5 * Math.log(1 + 2 / (9 * p)) - 0.01);
  const yMax = Math.max(upper * 1.15, ...samples.map(([, v]) => v));

  const c = chart(opts);
  c.domain(w0 - 0.5, w1 + 0.5, 0, yMax);
  c.title(opts.title ?? `minute lengths vs proven bounds (p=${p})`);
  c.axes("minute i", "t01[i+1] - t01[i]");
  for (const [i, v] of samples) c.dot(i, v, PALETTE[0], 3.5);
  c.hline(lower, PALETTE[1], "6,3", `lower ${lower.toFixed(2)}`);
  c.hline(upper, PALETTE[3], "6,3", `upper 2.11 + ln(1/p)/2 = ${upper.toFixed(2)}`);
  return c.toString();
}
