#!/usr/bin/env node
/**
 * plots render --spec figures.json
 *
 * Reads the figure manifest, renders each figure from the simulation CSVs /
 * JSON reports, and writes deterministic SVG files.  Never recomputes any
 * science: inputs are consumed as-is.
 */

import { mkdirSync, readFileSync, writeFileSync } from "fs";
import { dirname } from "path";
import { FigureSpec, render } from "./figures.js";

function main(argv: string[]): number {
  const [cmd, ...rest] = argv;
  if (cmd !== "render") {
    console.error("usage: plots render --spec figures.json");
    return 2;
  }
  const i = rest.indexOf("--spec");
  if (i < 0 || !rest[i + 1]) {
    console.error("missing --spec");
    return 2;
  }
  const manifest = JSON.parse(readFileSync(rest[i + 1], "utf-8")) as {
    figures: FigureSpec[];
  };
  for (const spec of manifest.figures) {
    const svg = render(spec);
    mkdirSync(dirname(spec.output), { recursive: true });
    writeFileSync(spec.output, svg);
    console.log(`wrote ${spec.output}`);
  }
  return 0;
}

process.exit(main(process.argv.slice(2)));
