/**
 * Figure builders over the primary component's logged columns.
 *
 * These scripts never recompute physics: every curve is a logged column or
 * an elementary transform of one (products, square roots, logs), and the
 * only fit performed is the display trendline of the free-boundary figure,
 * whose annotated slope must agree with the reconstruction JSON.
 */

import { SchemaError, readJsonDoc, readPairsCsv, readRunCsv } from "./io.js";
import { buildChart, fmt, linearFit, sig } from "./svg.js";

export type FigureKind =
  | "b_law"
  | "lambda_law"
  | "free_boundary"
  | "spectrum_table"
  | "residual_order";

export function buildFigure(kind: FigureKind, inputPath: string): string {
  switch (kind) {
    case "b_law":
      return bLaw(inputPath);
    case "lambda_law":
      return lambdaLaw(inputPath);
    case "free_boundary":
      return freeBoundary(inputPath);
    case "spectrum_table":
      return spectrumTable(inputPath);
    case "residual_order":
      return residualOrder(inputPath);
    default:
      throw new SchemaError(`unknown figure kind '${kind}'`);
  }
}

function bLaw(path: string): string {
  const log = readRunCsv(path, ["s", "b"]);
  const c1 = Number(log.meta["c1"]);
  if (!Number.isFinite(c1)) throw new SchemaError(`${path}: missing meta 'c1'`);
  const s = log.columns["s"];
  const y = log.columns["b"].map((b, i) => b * c1 * s[i]);
  return buildChart({
    title: "Normalized drift law along the run",
    xLabel: "s",
    yLabel: "b(s) c1 s",
    series: [{ x: s, y, color: "#1f5fbf", label: "b c1 s" }],
    hLines: [{ value: 1.0, color: "#2d6a4f", label: "law value 1" }],
  });
}

function lambdaLaw(path: string): string {
  const log = readRunCsv(path, ["s", "lambda"]);
  const s = log.columns["s"];
  const y = log.columns["lambda"].map((l, i) => l * Math.exp(s[i] / 2.0));
  return buildChart({
    title: "Scale against the self-similar rate",
    xLabel: "s",
    yLabel: "lambda(s) e^(s/2)",
    series: [{ x: s, y, color: "#b23a48", label: "lambda e^(s/2)" }],
    hLines: [{ value: 1.0, color: "#888888", label: "pure self-similar" }],
  });
}

function freeBoundary(path: string): string {
  const doc = readJsonDoc(path, ["c_star", "fit_intercept", "series"]);
  for (const field of ["sqrt_abs_log_T_minus_t", "inv_sqrt_b"]) {
    if (!(field in doc.series)) {
      throw new SchemaError(`${path}: missing required field 'series.${field}'`);
    }
  }
  const x: number[] = doc.series.sqrt_abs_log_T_minus_t;
  const y: number[] = doc.series.inv_sqrt_b;
  // display trendline recomputed from the logged columns; it must agree
  // with the reconstruction's own fit
  const fit = linearFit(x, y);
  const xs = [Math.min(...x), Math.max(...x)];
  const line = xs.map((v) => fit.slope * v + fit.intercept);
  return buildChart({
    title: "Free-boundary speed against the logarithmic clock",
    xLabel: "sqrt(|log(T - t)|)",
    yLabel: "1 / sqrt(b)",
    series: [
      { x, y, color: "#1f5fbf", label: "run" },
      {
        x: xs,
        y: line,
        color: "#e07b00",
        label: `fit slope ${sig(fit.slope, 4)}`,
        dash: "5,4",
      },
    ],
    annotations: [
      `slope (figure fit) = ${sig(fit.slope, 4)}`,
      `c* (reconstruction) = ${sig(doc.c_star, 4)}`,
    ],
  });
}

function spectrumTable(path: string): string {
  const doc = readJsonDoc(path, ["eigenvalues", "ell0", "M_of_j", "nondegeneracy"]);
  const vals: number[] = doc.eigenvalues;
  const x = vals.map((_, i) => i - doc.ell0);
  const mline = Object.entries(doc.M_of_j as Record<string, number>)
    .sort(([a], [b]) => Number(a) - Number(b))
    .map(([j, m]) => `M(${j}) = ${m}`)
    .join(", ");
  return buildChart({
    title: "Radial spectrum (indexed about the negative block)",
    xLabel: "index j",
    yLabel: "eigenvalue",
    series: [{ x, y: vals, color: "#1f5fbf", label: "eigenvalues", width: 1.0 }],
    hLines: [
      { value: 0.0, color: "#888888", label: "zero" },
      { value: -1.0, color: "#2d6a4f", label: "scaling mode" },
    ],
    annotations: [
      `ell0 = ${doc.ell0}; ${mline}`,
      `nondegeneracy: ${doc.nondegeneracy.verdict}${doc.nondegeneracy.vacuous ? " (vacuous)" : ""}`,
    ],
  });
}

function residualOrder(path: string): string {
  const { x: b, y: resid } = readPairsCsv(path, "b", "residual");
  const lx = b.map(Math.log10);
  const ly = resid.map(Math.log10);
  const fit = linearFit(lx, ly);
  return buildChart({
    title: "Localized residual against the layer parameter",
    xLabel: "log10 b",
    yLabel: "log10 residual",
    series: [
      { x: lx, y: ly, color: "#1f5fbf", label: "residual" },
      {
        x: [Math.min(...lx), Math.max(...lx)],
        y: [Math.min(...lx), Math.max(...lx)].map((v) => fit.slope * v + fit.intercept),
        color: "#e07b00",
        label: `slope ${sig(fit.slope, 4)}`,
        dash: "5,4",
      },
    ],
    annotations: [`slope = ${sig(fit.slope, 4)}`],
  });
}

export { fmt };
