import { readFileSync } from "fs";
import { Table, col, readCsv } from "./csv.js";
import { H, MARGIN, Scale, W, fmt, frame, legend, linScale, logScale, polyline } from "./svg.js";

export interface FigureSpec {
  kind: "tail-loglog" | "rescaled-convergence" | "candidate-bars" | "spectral-heatmap";
  input?: string;
  inputs?: Record<string, string>;
  output: string;
  title?: string;
}

const X0 = MARGIN.l, X1 = W - MARGIN.r, Y0 = H - MARGIN.b, Y1 = MARGIN.t;

/** Survival log-log with the predicted slope overlaid on the fit window. */
export function tailLoglog(t: Table, title = "Return-duration survival"): string {
  const ts = col(t, "t");
  const est = col(t, "estimate");
  const pts = ts.map((x, i) => [x, est[i]] as const).filter(([x, y]) => y > 0 && x >= 1);
  const sx = logScale(1, Math.max(...pts.map(([x]) => x)), X0, X1);
  const lo = Math.min(...pts.map(([, y]) => y));
  const sy = logScale(Math.max(lo, 1e-12), 1.0, Y0, Y1);
  const body: string[] = [];
  body.push(polyline(pts.map(([x]) => sx(x)), pts.map(([, y]) => sy(y)), "#4361ee", 1.8));
  // reference slope -1/3 anchored at t = 100
  const i0 = pts.findIndex(([x]) => x >= 100);
  if (i0 >= 0) {
    const [xa, ya] = pts[i0];
    const xs = [xa, Math.max(...pts.map(([x]) => x))];
    const ys = xs.map((x) => ya * (x / xa) ** (-1 / 3));
    body.push(polyline(xs.map(sx), ys.map(sy), "#e63946", 1.2, "6,3"));
  }
  body.push(...legend([
    { color: "#4361ee", label: "empirical survival" },
    { color: "#e63946", label: "reference slope -1/3" },
  ]));
  return frame(title, "t", "mu(tau > t)", sx, sy, body);
}

/** Rescaled statistic against its constant target across epochs. */
export function rescaledConvergence(t: Table, title = "Rescaled tail statistic"): string {
  const ts = col(t, "t");
  const hasTail = t.header.includes("rescaled");
  const val = col(t, hasTail ? "rescaled" : "dp_hat");
  const target = col(t, "target")[0];
  const pts = ts.map((x, i) => [x, val[i]] as const).filter(([x, y]) => x >= 5 && y > 0);
  const sx = logScale(Math.min(...pts.map(([x]) => x)), Math.max(...pts.map(([x]) => x)), X0, X1);
  const ymax = Math.max(...pts.map(([, y]) => y), target) * 1.15;
  const sy = linScale(0, ymax, Y0, Y1);
  const body: string[] = [];
  body.push(polyline(pts.map(([x]) => sx(x)), pts.map(([, y]) => sy(y)), "#4361ee", 1.8));
  body.push(polyline([X0, X1], [sy(target), sy(target)], "#2d6a4f", 1.2, "6,3"));
  body.push(...legend([
    { color: "#4361ee", label: "rescaled estimate" },
    { color: "#2d6a4f", label: `target ${fmt(target)}` },
  ]));
  return frame(title, "t", "estimate * t^(1-1/p) * ell*(t)", sx, sy, body);
}

interface Candidate { tag: string; value: number }

/** Constant candidates as bars against the empirical CI band. */
export function candidateBars(constantsJson: string, smooth: Table,
                              title = "d_p candidate adjudication"): string {
  const rep = JSON.parse(constantsJson) as { d_p_candidates: Candidate[] };
  const cands = rep.d_p_candidates;
  const dpLow = col(smooth, "dp_low");
  const dpHigh = col(smooth, "dp_high");
  const dpHat = col(smooth, "dp_hat");
  const last = dpHat.length - 1;
  const vmax = Math.max(...cands.map((c) => c.value), dpHigh[last]) * 1.1;
  const sy = linScale(0, vmax, Y0, Y1);
  const n = cands.length;
  const bw = (X1 - X0) / (n + 1);
  const body: string[] = [];
  // CI band of the top-anchor empirical value
  body.push(`<rect x="${X0}" y="${fmt(sy(dpHigh[last]))}" width="${X1 - X0}" height="${fmt(sy(dpLow[last]) - sy(dpHigh[last]))}" fill="#ffd16655"/>`);
  body.push(polyline([X0, X1], [sy(dpHat[last]), sy(dpHat[last])], "#b8860b", 1.2, "4,3"));
  cands.forEach((c, i) => {
    const x = X0 + bw * (i + 0.5);
    const inside = c.value >= dpLow[last] && c.value <= dpHigh[last];
    const color = inside ? "#2d6a4f" : "#4361ee";
    body.push(`<rect x="${fmt(x)}" y="${fmt(sy(c.value))}" width="${fmt(bw * 0.6)}" height="${fmt(Y0 - sy(c.value))}" fill="${color}"/>`);
    body.push(`<text x="${fmt(x + bw * 0.3)}" y="${Y0 + 14}" font-size="9" text-anchor="end" transform="rotate(-35 ${fmt(x + bw * 0.3)} ${Y0 + 14})">${c.tag}</text>`);
  });
  const sx = linScale(0, 1, X0, X1);
  sx.ticks = [];
  return frame(title, "", "d_p", sx, sy, body);
}

/** |lambda| over the (b, theta) grid as colored cells. */
export function spectralHeatmap(t: Table, title = "Twisted eigenvalue modulus"): string {
  const b = col(t, "b");
  const th = col(t, "theta");
  const re = col(t, "re_lambda");
  const im = col(t, "im_lambda");
  const us = col(t, "u");
  const u0 = us[0];
  const rows = b.map((_, i) => i).filter((i) => us[i] === u0);
  const bs = [...new Set(rows.map((i) => b[i]))].sort((p, q) => p - q);
  const ths = [...new Set(rows.map((i) => th[i]))].sort((p, q) => p - q);
  const sx = linScale(bs[0], bs[bs.length - 1], X0, X1);
  const sy = linScale(ths[0], ths[ths.length - 1], Y0, Y1);
  const cw = (X1 - X0) / bs.length;
  const ch = (Y0 - Y1) / ths.length;
  const body: string[] = [];
  for (const i of rows) {
    const m = Math.min(Math.hypot(re[i], im[i]), 1);
    const shade = Math.round(255 * (1 - m));
    const color = `rgb(255,${shade},${shade})`;
    body.push(`<rect x="${fmt(sx(b[i]) - cw / 2)}" y="${fmt(sy(th[i]) - ch / 2)}" width="${fmt(cw)}" height="${fmt(ch)}" fill="${color}"/>`);
  }
  return frame(`${title} (u=${fmt(u0)})`, "b", "theta", sx, sy, body);
}

export function render(spec: FigureSpec): string {
  switch (spec.kind) {
    case "tail-loglog":
      return tailLoglog(readCsv(need(spec.input, spec)), spec.title);
    case "rescaled-convergence":
      return rescaledConvergence(readCsv(need(spec.input, spec)), spec.title);
    case "candidate-bars": {
      const ins = spec.inputs ?? {};
      return candidateBars(readFileSync(need(ins.constants, spec), "utf-8"),
                           readCsv(need(ins.smooth, spec)), spec.title);
    }
    case "spectral-heatmap":
      return spectralHeatmap(readCsv(need(spec.input, spec)), spec.title);
    default:
      throw new Error(`unknown figure kind '${(spec as FigureSpec).kind}'`);
  }
}

function need(path: string | undefined, spec: FigureSpec): string {
  if (!path) throw new Error(`figure ${spec.kind}: missing input path`);
  return path;
}
