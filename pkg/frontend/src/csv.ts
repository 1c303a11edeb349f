import * as fs from "fs";

export class SchemaError extends Error {}

export interface Table {
  file: string;
  columns: string[];
  rows: string[][];
}

/** Plain comma-separated values; the simulator never emits quoted cells. */
export function readCsv(file: string): Table {
  if (!fs.existsSync(file)) {
    throw new SchemaError(`${file}: file not found`);
  }
  const text = fs.readFileSync(file, "utf8");
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${file}: empty file`);
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { file, columns, rows };
}

export function requireColumns(table: Table, needed: string[]): void {
  for (const col of needed) {
    if (!table.columns.includes(col)) {
      throw new SchemaError(`${table.file}: missing column '${col}'`);
    }
  }
}

export function column(table: Table, name: string): string[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`${table.file}: missing column '${name}'`);
  }
  return table.rows.map((r) => r[idx] ?? "");
}

export function numericColumn(table: Table, name: string): number[] {
  return column(table, name).map((v, i) => {
    if (v === "") return NaN;
    const x = Number(v);
    if (Number.isNaN(x)) {
      throw new SchemaError(`${table.file}: column '${name}' row ${i + 2} is not numeric: '${v}'`);
    }
    return x;
  });
}

/** Sibling meta.json written by the simulator next to each timeline.csv. */
export function readProjection(csvPath: string): string[] | null {
  const metaPath = csvPath.replace(/[^/\\]+$/, "meta.json");
  if (!fs.existsSync(metaPath)) return null;
  try {
    const meta = JSON.parse(fs.readFileSync(metaPath, "utf8"));
    return Array.isArray(meta.projection) ? meta.projection.map(String) : null;
  } catch {
    return null;
  }
}
