#!/usr/bin/env node
import { pathToFileURL } from "url";

import { writeFigure } from "./figures.js";
import { loadSpec } from "./spec.js";

export function main(argv: string[]): number {
  const flag = argv.indexOf("--spec");
  if (flag < 0 || flag + 1 >= argv.length) {
    process.stderr.write("usage: make_figure --spec <figure-spec.json>\n");
    return 2;
  }
  try {
    const out = writeFigure(loadSpec(argv[flag + 1]));
    process.stdout.write(`wrote ${out}\n`);
    return 0;
  } catch (err) {
    process.stderr.write(`make_figure: ${(err as Error).message}\n`);
    return 1;
  }
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
