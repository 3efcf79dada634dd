import { existsSync, readFileSync } from "fs";

export type FigureKind = "slope" | "trajectory_fan" | "rate_vs_mc" | "continuity";

/** Declarative figure request: input files, kind, output path, options. */
export interface FigureSpec {
  kind: FigureKind;
  output: string;
  /** slope / continuity: one report CSV per series */
  files?: string[];
  /** trajectory_fan inputs */
  particles?: string;
  limit?: string;
  skeleton?: string;
  /** rate_vs_mc inputs */
  rate_summary?: string;
  rare_files?: string[];
  options?: {
    title?: string;
    coordinate?: number;
    max_paths?: number;
  };
}

const KINDS: FigureKind[] = ["slope", "trajectory_fan", "rate_vs_mc", "continuity"];

function requireFiles(paths: string[], what: string): void {
  if (paths.length === 0) {
    throw new Error(`figure spec needs at least one ${what}`);
  }
  for (const p of paths) {
    if (!existsSync(p)) {
      throw new Error(`input file does not exist: ${p}`);
    }
  }
}

export function validateSpec(spec: FigureSpec): FigureSpec {
  if (!KINDS.includes(spec.kind)) {
    throw new Error(`unknown figure kind '${spec.kind}'`);
  }
  if (!spec.output) {
    throw new Error("figure spec needs an output path");
  }
  if (spec.kind === "slope" || spec.kind === "continuity") {
    requireFiles(spec.files ?? [], "input CSV");
  } else if (spec.kind === "trajectory_fan") {
    requireFiles(spec.particles ? [spec.particles] : [], "particles CSV");
    for (const p of [spec.limit, spec.skeleton]) {
      if (p !== undefined) requireFiles([p], "overlay CSV");
    }
  } else {
    requireFiles(spec.rate_summary ? [spec.rate_summary] : [], "rate summary");
    requireFiles(spec.rare_files ?? [], "rare-event CSV");
  }
  return spec;
}

export function loadSpec(path: string): FigureSpec {
  if (!existsSync(path)) {
    throw new Error(`spec file does not exist: ${path}`);
  }
  return validateSpec(JSON.parse(readFileSync(path, "utf8")) as FigureSpec);
}
