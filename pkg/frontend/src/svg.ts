/**
 * Minimal hand-rolled SVG chart builder: axes, polylines, step curves,
 * reference lines and a legend.  Deterministic output for a given input.
 */

export interface Series {
  x: number[];
  y: number[];
  color: string;
  label: string;
  step?: boolean;        // right-continuous step curve (for ecdfs)
  dash?: string;
  marker?: boolean;
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  vlines?: { x: number; label: string; color?: string }[];
  hlines?: { y: number; label: string; color?: string }[];
  logY?: boolean;
  width?: number;
  height?: number;
}

const MARGIN = { top: 36, right: 24, bottom: 46, left: 64 };

function extent(vals: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of vals) {
    if (!Number.isFinite(v)) continue;
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (!Number.isFinite(lo)) return [0, 1];
  if (lo === hi) return [lo - 0.5, hi + 0.5];
  return [lo, hi];
}

function ticks(lo: number, hi: number, n = 6): number[] {
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / n)));
  const candidates = [step, 2 * step, 5 * step, 10 * step];
  const chosen = candidates.find((s) => span / s <= n) ?? 10 * step;
  const first = Math.ceil(lo / chosen) * chosen;
  const out: number[] = [];
  for (let t = first; t <= hi + 1e-12 * span; t += chosen) out.push(t);
  return out;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return parseFloat(v.toPrecision(4)).toString();
}

export function renderChart(spec: ChartSpec): string {
  const W = spec.width ?? 640;
  const H = spec.height ?? 420;
  const iw = W - MARGIN.left - MARGIN.right;
  const ih = H - MARGIN.top - MARGIN.bottom;

  const xs = spec.series.flatMap((s) => s.x).concat(
    (spec.vlines ?? []).map((l) => l.x)
  );
  let ys = spec.series.flatMap((s) => s.y).concat(
    (spec.hlines ?? []).map((l) => l.y)
  );
  if (spec.logY) ys = ys.filter((v) => v > 0).map(Math.log10);
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);

  const sx = (x: number) => MARGIN.left + ((x - x0) / (x1 - x0)) * iw;
  const sy = (y: number) => {
    const v = spec.logY ? Math.log10(Math.max(y, 1e-300)) : y;
    return MARGIN.top + ih - ((v - y0) / (y1 - y0)) * ih;
  };

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
    `viewBox="0 0 ${W} ${H}" font-family="sans-serif" font-size="12">`
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(
    `<text x="${W / 2}" y="18" text-anchor="middle" font-size="14">` +
    `${spec.title}</text>`
  );

  for (const t of ticks(x0, x1)) {
    const px = sx(t);
    parts.push(
      `<line x1="${px.toFixed(2)}" y1="${MARGIN.top}" x2="${px.toFixed(2)}" ` +
      `y2="${MARGIN.top + ih}" stroke="#eee"/>`,
      `<text x="${px.toFixed(2)}" y="${MARGIN.top + ih + 16}" ` +
      `text-anchor="middle">${fmt(t)}</text>`
    );
  }
  const yticks = spec.logY
    ? ticks(y0, y1).map((t) => Math.pow(10, t))
    : ticks(y0, y1);
  for (const t of yticks) {
    const py = sy(t);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py.toFixed(2)}" ` +
      `x2="${MARGIN.left + iw}" y2="${py.toFixed(2)}" stroke="#eee"/>`,
      `<text x="${MARGIN.left - 6}" y="${(py + 4).toFixed(2)}" ` +
      `text-anchor="end">${fmt(t)}</text>`
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${iw}" height="${ih}" ` +
    `fill="none" stroke="#333"/>`,
    `<text x="${MARGIN.left + iw / 2}" y="${H - 10}" text-anchor="middle">` +
    `${spec.xLabel}</text>`,
    `<text x="16" y="${MARGIN.top + ih / 2}" text-anchor="middle" ` +
    `transform="rotate(-90 16 ${MARGIN.top + ih / 2})">${spec.yLabel}</text>`
  );

  for (const line of spec.vlines ?? []) {
    const px = sx(line.x);
    parts.push(
      `<line x1="${px.toFixed(2)}" y1="${MARGIN.top}" x2="${px.toFixed(2)}" ` +
      `y2="${MARGIN.top + ih}" stroke="${line.color ?? "#a00"}" ` +
      `stroke-dasharray="5,4"/>`,
      `<text x="${(px + 4).toFixed(2)}" y="${MARGIN.top + 14}" ` +
      `fill="${line.color ?? "#a00"}">${line.label}</text>`
    );
  }
  for (const line of spec.hlines ?? []) {
    const py = sy(line.y);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${py.toFixed(2)}" ` +
      `x2="${MARGIN.left + iw}" y2="${py.toFixed(2)}" ` +
      `stroke="${line.color ?? "#a00"}" stroke-dasharray="5,4"/>`,
      `<text x="${MARGIN.left + iw - 4}" y="${(py - 6).toFixed(2)}" ` +
      `text-anchor="end" fill="${line.color ?? "#a00"}">${line.label}</text>`
    );
  }

  spec.series.forEach((s, si) => {
    const pts: string[] = [];
    for (let i = 0; i < s.x.length; i++) {
      if (!Number.isFinite(s.y[i]) || (spec.logY && s.y[i] <= 0)) continue;
      if (s.step && i > 0) {
        pts.push(`${sx(s.x[i]).toFixed(2)},${sy(s.y[i - 1]).toFixed(2)}`);
      }
      pts.push(`${sx(s.x[i]).toFixed(2)},${sy(s.y[i]).toFixed(2)}`);
    }
    parts.push(
      `<polyline points="${pts.join(" ")}" fill="none" stroke="${s.color}" ` +
      `stroke-width="1.6"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`
    );
    if (s.marker) {
      for (let i = 0; i < s.x.length; i++) {
        if (!Number.isFinite(s.y[i])) continue;
        parts.push(
          `<circle cx="${sx(s.x[i]).toFixed(2)}" cy="${sy(s.y[i]).toFixed(2)}" ` +
          `r="3" fill="${s.color}"/>`
        );
      }
    }
    const ly = MARGIN.top + 16 + 16 * si;
    parts.push(
      `<line x1="${MARGIN.left + iw - 130}" y1="${ly - 4}" ` +
      `x2="${MARGIN.left + iw - 104}" y2="${ly - 4}" stroke="${s.color}" ` +
      `stroke-width="2"${s.dash ? ` stroke-dasharray="${s.dash}"` : ""}/>`,
      `<text x="${MARGIN.left + iw - 100}" y="${ly}">${s.label}</text>`
    );
  });

  parts.push("</svg>");
  return parts.join("\n");
}
