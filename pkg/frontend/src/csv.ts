import { readFileSync } from "fs";

/** Parsed mvldp data file: optional provenance comment, header row, cells. */
export interface DataTable {
  path: string;
  provenance: string | null;
  header: string[];
  cells: string[][];
}

export function readTable(path: string): DataTable {
  const text = readFileSync(path, "utf8");
  const lines = text.split("\n").filter((line) => line.length > 0);
  let provenance: string | null = null;
  let start = 0;
  if (lines.length > 0 && lines[0].startsWith("#")) {
    provenance = lines[0];
    start = 1;
  }
  if (lines.length <= start) {
    throw new Error(`empty data file: ${path}`);
  }
  const header = lines[start].split(",");
  const cells = lines.slice(start + 1).map((line) => line.split(","));
  if (cells.length === 0) {
    throw new Error(`no data rows in ${path}`);
  }
  for (const row of cells) {
    if (row.length !== header.length) {
      throw new Error(`ragged row in ${path}: expected ${header.length} cells`);
    }
  }
  return { path, provenance, header, cells };
}

export function columnIndex(table: DataTable, name: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new Error(`missing column '${name}' in ${table.path}`);
  }
  return idx;
}

export function column(table: DataTable, name: string): string[] {
  const idx = columnIndex(table, name);
  return table.cells.map((row) => row[idx]);
}

const parseNumber = (token: string, where: string): number => {
  if (token === "inf") return Infinity;
  if (token === "-inf") return -Infinity;
  const value = Number(token);
  if (Number.isNaN(value)) {
    throw new Error(`non-numeric cell '${token}' in ${where}`);
  }
  return value;
};

export function numbers(table: DataTable, name: string): number[] {
  return column(table, name).map((tok) => parseNumber(tok, table.path));
}

export function readJsonl(path: string): Record<string, unknown>[] {
  const text = readFileSync(path, "utf8");
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map((line) => JSON.parse(line) as Record<string, unknown>);
}
