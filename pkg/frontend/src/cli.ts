#!/usr/bin/env node
/**
 * plots <kind> --in <input> --out <figure.svg>
 *
 * kinds: b_law | lambda_law | free_boundary | spectrum_table | residual_order
 *
 * b_law and lambda_law read the run CSV; free_boundary reads the
 * reconstruction JSON; spectrum_table reads the spectrum JSON;
 * residual_order reads a two-column CSV (b, residual).  Exit code 0 on
 * success, 1 with the offending column or field named on schema errors.
 */

import { writeFileSync } from "fs";
import { SchemaError } from "./io.js";
import { buildFigure, FigureKind } from "./figures.js";

const KINDS = [
  "b_law",
  "lambda_law",
  "free_boundary",
  "spectrum_table",
  "residual_order",
];

export function main(argv: string[]): number {
  const [kind, ...rest] = argv;
  if (!kind || !KINDS.includes(kind)) {
    console.error(`usage: plots <${KINDS.join("|")}> --in FILE --out FILE`);
    return 2;
  }
  let input = "";
  let output = "";
  for (let i = 0; i < rest.length; i += 2) {
    const flag = rest[i];
    const val = rest[i + 1];
    if (flag === "--in") input = val;
    else if (flag === "--out") output = val;
    else {
      console.error(`unknown flag ${flag}`);
      return 2;
    }
  }
  if (!input || !output) {
    console.error("both --in and --out are required");
    return 2;
  }
  try {
    const svg = buildFigure(kind as FigureKind, input);
    writeFileSync(output, svg);
    console.log(`wrote ${output}`);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError) {
      console.error(`schema error: ${err.message}`);
      return 1;
    }
    throw err;
  }
}

main(process.argv.slice(2));
