/**
 * Minimal deterministic SVG line charts.
 *
 * No timestamps, no randomness, fixed styles and tick formatting, so a
 * figure regenerated from identical inputs is byte-identical.
 */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label: string;
  width?: number;
  dash?: string;
}

export interface ChartOpts {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  hLines?: { value: number; color: string; label: string }[];
  annotations?: string[];
  logY?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { top: 42, right: 24, bottom: 46, left: 64 };

export function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(2);
  return Number(v.toPrecision(6)).toString();
}

function ticks(lo: number, hi: number, n = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step0 = span / n;
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((c) => span / c <= n) ?? candidates[4];
  const first = Math.ceil(lo / step) * step;
  if (first + step === first) return [lo, hi]; // step below float resolution
  const out: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span && out.length <= 64; v += step) {
    out.push(v);
  }
  return out;
}

export function buildChart(opts: ChartOpts): string {
  const W = opts.width ?? 720;
  const H = opts.height ?? 480;
  const iw = W - MARGIN.left - MARGIN.right;
  const ih = H - MARGIN.top - MARGIN.bottom;

  const allX = opts.series.flatMap((s) => s.x);
  let allY = opts.series.flatMap((s) => s.y);
  for (const h of opts.hLines ?? []) allY.push(h.value);
  const ty = opts.logY ? (v: number) => Math.log10(v) : (v: number) => v;
  allY = allY.map(ty).filter((v) => Number.isFinite(v));
  const x0 = Math.min(...allX);
  const x1 = Math.max(...allX);
  let y0 = Math.min(...allY);
  let y1 = Math.max(...allY);
  if (y1 - y0 <= 1e-9 * Math.max(Math.abs(y0), Math.abs(y1), 1)) {
    // essentially constant series (e.g. the exact law): fixed unit window
    y0 -= 1;
    y1 += 1;
  } else {
    const pad = 0.06 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
  }
  const px = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0 || 1)) * iw;
  const py = (y: number) => MARGIN.top + ih - ((ty(y) - y0) / (y1 - y0)) * ih;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`
  );
  parts.push(`<rect width="${W}" height="${H}" fill="#ffffff"/>`);
  parts.push(
    `<text x="${W / 2}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15" fill="#222">${opts.title}</text>`
  );

  // frame and ticks
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" fill="none" stroke="#999" stroke-width="1"/>`
  );
  for (const tx of ticks(x0, x1)) {
    const X = px(tx);
    parts.push(
      `<line x1="${X.toFixed(2)}" y1="${MARGIN.top + ih}" x2="${X.toFixed(2)}" y2="${MARGIN.top + ih + 5}" stroke="#666"/>`,
      `<text x="${X.toFixed(2)}" y="${MARGIN.top + ih + 18}" text-anchor="middle" font-family="sans-serif" font-size="11" fill="#444">${fmt(tx)}</text>`
    );
  }
  for (const tv of ticks(y0, y1)) {
    const Y = MARGIN.top + ih - ((tv - y0) / (y1 - y0)) * ih;
    const label = opts.logY ? `1e${fmt(tv)}` : fmt(tv);
    parts.push(
      `<line x1="${MARGIN.left - 5}" y1="${Y.toFixed(2)}" x2="${MARGIN.left}" y2="${Y.toFixed(2)}" stroke="#666"/>`,
      `<text x="${MARGIN.left - 8}" y="${(Y + 4).toFixed(2)}" text-anchor="end" font-family="sans-serif" font-size="11" fill="#444">${label}</text>`
    );
  }
  parts.push(
    `<text x="${MARGIN.left + iw / 2}" y="${H - 10}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#222">${opts.xLabel}</text>`,
    `<text x="16" y="${MARGIN.top + ih / 2}" text-anchor="middle" font-family="sans-serif" font-size="12" fill="#222" transform="rotate(-90 16 ${MARGIN.top + ih / 2})">${opts.yLabel}</text>`
  );

  for (const h of opts.hLines ?? []) {
    const Y = py(h.value);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${Y.toFixed(2)}" x2="${MARGIN.left + iw}" y2="${Y.toFixed(2)}" stroke="${h.color}" stroke-width="1" stroke-dasharray="6,4"/>`,
      `<text x="${MARGIN.left + iw - 4}" y="${(Y - 4).toFixed(2)}" text-anchor="end" font-family="sans-serif" font-size="11" fill="${h.color}">${h.label}</text>`
    );
  }

  let legendY = MARGIN.top + 14;
  for (const s of opts.series) {
    const pts = s.x
      .map((x, i) => [px(x), py(s.y[i])] as const)
      .filter(([, Y]) => Number.isFinite(Y))
      .map(([X, Y]) => `${X.toFixed(2)},${Y.toFixed(2)}`)
      .join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="${s.width ?? 1.4}"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`
    );
    parts.push(
      `<line x1="${MARGIN.left + 10}" y1="${legendY}" x2="${MARGIN.left + 34}" y2="${legendY}" stroke="${s.color}" stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`,
      `<text x="${MARGIN.left + 40}" y="${legendY + 4}" font-family="sans-serif" font-size="11" fill="#333">${s.label}</text>`
    );
    legendY += 16;
  }

  let annY = MARGIN.top + 14;
  for (const note of opts.annotations ?? []) {
    parts.push(
      `<text x="${MARGIN.left + iw - 8}" y="${annY}" text-anchor="end" font-family="sans-serif" font-size="12" fill="#111">${note}</text>`
    );
    annY += 16;
  }

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

/** Least-squares line y = slope x + intercept. */
export function linearFit(x: number[], y: number[]): { slope: number; intercept: number } {
  const n = x.length;
  let sx = 0,
    sy = 0,
    sxx = 0,
    sxy = 0;
  for (let i = 0; i < n; i++) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const det = n * sxx - sx * sx;
  const slope = (n * sxy - sx * sy) / det;
  return { slope, intercept: (sy - slope * sx) / n };
}

/** Format to a fixed number of significant digits (annotation-stable). */
export function sig(v: number, digits: number): string {
  return v.toPrecision(digits);
}
