/** Minimal deterministic SVG chart primitives (no DOM, no dates, fixed
 * number formatting so identical inputs give identical bytes). */

export const W = 720;
export const H = 480;
export const MARGIN = { l: 70, r: 20, t: 40, b: 55 };

export function fmt(x: number): string {
  if (!isFinite(x)) return "0";
  return Number(x.toPrecision(8)).toString();
}

export interface Scale {
  (v: number): number;
  ticks: number[];
  label: (v: number) => string;
}

export function linScale(lo: number, hi: number, out0: number, out1: number): Scale {
  const f = ((v: number) => out0 + ((v - lo) / (hi - lo)) * (out1 - out0)) as Scale;
  const step = niceStep((hi - lo) / 6);
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / step) * step; v <= hi + 1e-12; v += step) ticks.push(v);
  f.ticks = ticks;
  f.label = (v) => fmt(v);
  return f;
}

export function logScale(lo: number, hi: number, out0: number, out1: number): Scale {
  const a = Math.log10(lo);
  const b = Math.log10(hi);
  const f = ((v: number) => out0 + ((Math.log10(v) - a) / (b - a)) * (out1 - out0)) as Scale;
  const ticks: number[] = [];
  for (let e = Math.ceil(a); e <= Math.floor(b); e++) ticks.push(10 ** e);
  f.ticks = ticks;
  f.label = (v) => {
    const e = Math.round(Math.log10(v));
    return `1e${e}`;
  };
  return f;
}

function niceStep(raw: number): number {
  const mag = 10 ** Math.floor(Math.log10(raw));
  const r = raw / mag;
  return (r >= 5 ? 5 : r >= 2 ? 2 : 1) * mag;
}

export function polyline(xs: number[], ys: number[], color: string, width = 1.5,
                         dash = ""): string {
  const pts = xs.map((x, i) => `${fmt(x)},${fmt(ys[i])}`).join(" ");
  const d = dash ? ` stroke-dasharray="${dash}"` : "";
  return `<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="${width}"${d}/>`;
}

export function frame(title: string, xlab: string, ylab: string,
                      sx: Scale, sy: Scale, body: string[]): string {
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="sans-serif">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="24" text-anchor="middle" font-size="16">${title}</text>`);
  const x0 = MARGIN.l, x1 = W - MARGIN.r, y0 = H - MARGIN.b, y1 = MARGIN.t;
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x1}" y2="${y0}" stroke="black"/>`);
  parts.push(`<line x1="${x0}" y1="${y0}" x2="${x0}" y2="${y1}" stroke="black"/>`);
  for (const v of sx.ticks) {
    const x = fmt(sx(v));
    parts.push(`<line x1="${x}" y1="${y0}" x2="${x}" y2="${y0 + 5}" stroke="black"/>`);
    parts.push(`<line x1="${x}" y1="${y0}" x2="${x}" y2="${y1}" stroke="#eee"/>`);
    parts.push(`<text x="${x}" y="${y0 + 20}" text-anchor="middle" font-size="11">${sx.label(v)}</text>`);
  }
  for (const v of sy.ticks) {
    const y = fmt(sy(v));
    parts.push(`<line x1="${x0 - 5}" y1="${y}" x2="${x0}" y2="${y}" stroke="black"/>`);
    parts.push(`<line x1="${x0}" y1="${y}" x2="${x1}" y2="${y}" stroke="#eee"/>`);
    parts.push(`<text x="${x0 - 8}" y="${y}" text-anchor="end" dominant-baseline="middle" font-size="11">${sy.label(v)}</text>`);
  }
  parts.push(`<text x="${(x0 + x1) / 2}" y="${H - 12}" text-anchor="middle" font-size="13">${xlab}</text>`);
  parts.push(`<text x="18" y="${(y0 + y1) / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 18 ${(y0 + y1) / 2})">${ylab}</text>`);
  parts.push(...body);
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

export function legend(items: { color: string; label: string }[]): string[] {
  const x = MARGIN.l + 12;
  return items.map((it, i) => {
    const y = MARGIN.t + 14 + 16 * i;
    return `<rect x="${x}" y="${y - 8}" width="10" height="10" fill="${it.color}"/>` +
      `<text x="${x + 16}" y="${y}" font-size="12" dominant-baseline="middle">${it.label}</text>`;
  });
}
