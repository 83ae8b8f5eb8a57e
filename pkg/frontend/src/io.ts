/**
 * Readers for the primary component's file formats.
 *
 * run.csv: `# key: value` metadata lines, one fixed header row, float rows.
 * reconstruction.json / spectrum.json: plain JSON documents with a
 * format_version field.  Schema violations throw SchemaError naming the
 * offending column or field.
 */

import { readFileSync } from "fs";

export class SchemaError extends Error {}

export interface RunLog {
  meta: Record<string, string>;
  columns: Record<string, number[]>;
}

export function readRunCsv(path: string, required: string[]): RunLog {
  const text = readFileSync(path, "utf-8");
  const meta: Record<string, string> = {};
  const rows: number[][] = [];
  let header: string[] | null = null;
  for (const raw of text.split("\n")) {
    const line = raw.trim();
    if (!line) continue;
    if (line.startsWith("#")) {
      const body = line.slice(1);
      const k = body.indexOf(":");
      if (k >= 0) meta[body.slice(0, k).trim()] = body.slice(k + 1).trim();
      continue;
    }
    if (header === null) {
      header = line.split(",");
      continue;
    }
    rows.push(line.split(",").map(Number));
  }
  if (header === null) throw new SchemaError(`${path}: no header row`);
  const columns: Record<string, number[]> = {};
  header.forEach((name, i) => {
    const col = rows.map((r) => r[i]);
    const bad = col.findIndex((v) => !Number.isFinite(v));
    if (bad >= 0 && required.includes(name)) {
      throw new SchemaError(
        `${path}: non-numeric value in column '${name}' (row ${bad + 1})`
      );
    }
    columns[name] = col;
  });
  for (const name of required) {
    if (!(name in columns)) {
      throw new SchemaError(`${path}: missing required column '${name}'`);
    }
  }
  return { meta, columns };
}

export function readJsonDoc(path: string, required: string[]): any {
  let doc: any;
  try {
    doc = JSON.parse(readFileSync(path, "utf-8"));
  } catch (err) {
    throw new SchemaError(`${path}: not valid JSON (${err})`);
  }
  for (const field of required) {
    if (!(field in doc)) {
      throw new SchemaError(`${path}: missing required field '${field}'`);
    }
  }
  return doc;
}

/** Two-column CSV (optionally with # comments): used by residual_order. */
export function readPairsCsv(
  path: string,
  xName: string,
  yName: string
): { x: number[]; y: number[] } {
  const log = readRunCsv(path, [xName, yName]);
  return { x: log.columns[xName], y: log.columns[yName] };
}
