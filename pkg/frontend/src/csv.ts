// CSV/JSON artifact loading with loud failures on schema drift.

import { readFileSync } from "fs";
import { join } from "path";

export class SchemaError extends Error {}

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string): Table {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV: no header row");
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((l) => l.split(","));
  return { header, rows };
}

export function loadCsv(dir: string, name: string): Table {
  let text: string;
  try {
    text = readFileSync(join(dir, name), "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read ${name}: ${(err as Error).message}`);
  }
  return parseCsv(text);
}

export function column(table: Table, name: string): number[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `missing column '${name}' (have: ${table.header.join(", ")})`,
    );
  }
  return table.rows.map((r) => {
    const v = Number(r[idx]);
    if (Number.isNaN(v)) {
      throw new SchemaError(`non-numeric value in column '${name}': ${r[idx]}`);
    }
    return v;
  });
}

export function textColumn(table: Table, name: string): string[] {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `missing column '${name}' (have: ${table.header.join(", ")})`,
    );
  }
  return table.rows.map((r) => r[idx]);
}

export function loadJson<T = Record<string, unknown>>(
  dir: string,
  name: string,
): T {
  let text: string;
  try {
    text = readFileSync(join(dir, name), "utf8");
  } catch (err) {
    throw new SchemaError(`cannot read ${name}: ${(err as Error).message}`);
  }
  return JSON.parse(text) as T;
}

export function requireKeys(
  obj: Record<string, unknown>,
  keys: string[],
  source: string,
): void {
  for (const k of keys) {
    if (!(k in obj)) {
      throw new SchemaError(`${source} is missing key '${k}'`);
    }
  }
}
