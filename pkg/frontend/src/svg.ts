import { FONT, FONT_SIZE, GRID_COLOR, HEIGHT, MARGIN, TITLE_SIZE, WIDTH } from "./style.js";

export interface Scale {
  map(v: number): number;
  ticks(): number[];
}

const span = (values: number[]): [number, number] => {
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  if (lo === hi) {
    return lo === 0 ? [-1, 1] : [lo * 0.5, hi * 1.5];
  }
  return [lo, hi];
};

export function linearScale(values: number[], r0: number, r1: number): Scale {
  const [lo, hi] = span(values);
  const pad = 0.05 * (hi - lo);
  const d0 = lo - pad;
  const d1 = hi + pad;
  return {
    map: (v) => r0 + ((v - d0) / (d1 - d0)) * (r1 - r0),
    ticks: () => {
      const out: number[] = [];
      for (let i = 0; i <= 4; i++) out.push(d0 + ((d1 - d0) * i) / 4);
      return out;
    },
  };
}

export function logScale(values: number[], r0: number, r1: number): Scale {
  const positive = values.filter((v) => v > 0 && Number.isFinite(v));
  if (positive.length === 0) {
    throw new Error("log scale needs positive values");
  }
  const [lo, hi] = span(positive);
  const d0 = Math.log10(lo) - 0.1;
  const d1 = Math.log10(hi) + 0.1;
  return {
    map: (v) => r0 + ((Math.log10(v) - d0) / (d1 - d0)) * (r1 - r0),
    ticks: () => {
      const out: number[] = [];
      for (let e = Math.ceil(d0); e <= Math.floor(d1); e++) out.push(10 ** e);
      if (out.length < 2) out.push(10 ** d0, 10 ** d1);
      return out;
    },
  };
}

const escapeText = (s: string): string =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

export const el = (
  tag: string,
  attrs: Record<string, string | number>,
  content?: string,
): string => {
  const body = Object.entries(attrs)
    .map(([k, v]) => ` ${k}="${v}"`)
    .join("");
  return content === undefined
    ? `<${tag}${body}/>`
    : `<${tag}${body}>${content}</${tag}>`;
};

export const text = (
  x: number,
  y: number,
  content: string,
  attrs: Record<string, string | number> = {},
): string =>
  el(
    "text",
    { x: x.toFixed(2), y: y.toFixed(2), "font-family": FONT, "font-size": FONT_SIZE, ...attrs },
    escapeText(content),
  );

export const annotation = (x: number, y: number, content: string, color = "#111111"): string =>
  text(x, y, content, { class: "annotation", fill: color });

export const fmtTick = (v: number): string => {
  if (v !== 0 && (Math.abs(v) < 1e-2 || Math.abs(v) >= 1e4)) {
    return v.toExponential(0);
  }
  return Number(v.toPrecision(3)).toString();
};

export interface Frame {
  x: Scale;
  y: Scale;
  parts: string[];
}

/** Plot frame with axes, tick labels, optional grid, title and axis names. */
export function frame(
  xs: number[],
  ys: number[],
  opts: { logX?: boolean; logY?: boolean; title?: string; xLabel?: string; yLabel?: string },
): Frame {
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const y0 = HEIGHT - MARGIN.bottom;
  const y1 = MARGIN.top;
  const x = opts.logX ? logScale(xs, x0, x1) : linearScale(xs, x0, x1);
  const y = opts.logY ? logScale(ys, y0, y1) : linearScale(ys, y0, y1);
  const parts: string[] = [];
  parts.push(el("rect", {
    x: x0, y: y1, width: x1 - x0, height: y0 - y1,
    fill: "none", stroke: "#333333",
  }));
  for (const v of x.ticks()) {
    const px = x.map(v);
    parts.push(el("line", { x1: px.toFixed(2), y1: y0, x2: px.toFixed(2), y2: y1, stroke: GRID_COLOR, "stroke-dasharray": "2,4" }));
    parts.push(text(px, y0 + 18, fmtTick(v), { "text-anchor": "middle" }));
  }
  for (const v of y.ticks()) {
    const py = y.map(v);
    parts.push(el("line", { x1: x0, y1: py.toFixed(2), x2: x1, y2: py.toFixed(2), stroke: GRID_COLOR, "stroke-dasharray": "2,4" }));
    parts.push(text(x0 - 8, py + 4, fmtTick(v), { "text-anchor": "end" }));
  }
  if (opts.title) {
    parts.push(text(WIDTH / 2, MARGIN.top - 16, opts.title, {
      "text-anchor": "middle", "font-size": TITLE_SIZE, "font-weight": "bold",
    }));
  }
  if (opts.xLabel) {
    parts.push(text((x0 + x1) / 2, HEIGHT - 14, opts.xLabel, { "text-anchor": "middle" }));
  }
  if (opts.yLabel) {
    parts.push(el(
      "text",
      {
        x: 18, y: (y0 + y1) / 2, "font-family": FONT, "font-size": FONT_SIZE,
        "text-anchor": "middle", transform: `rotate(-90 18 ${(y0 + y1) / 2})`,
      },
      escapeText(opts.yLabel),
    ));
  }
  return { x, y, parts };
}

export function polyline(
  points: Array<[number, number]>,
  attrs: Record<string, string | number>,
): string {
  const pts = points.map(([px, py]) => `${px.toFixed(2)},${py.toFixed(2)}`).join(" ");
  return el("polyline", { points: pts, fill: "none", ...attrs });
}

export function legendEntry(x: number, y: number, color: string, label: string): string {
  return (
    el("rect", { x, y: y - 9, width: 14, height: 10, fill: color, class: "legend-swatch" })
    + text(x + 20, y, label, { class: "legend-label" })
  );
}

export function document(parts: string[]): string {
  return (
    `<?xml version="1.0" encoding="UTF-8"?>\n` +
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
    `viewBox="0 0 ${WIDTH} ${HEIGHT}">\n` +
    el("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "#ffffff" }) +
    "\n" + parts.join("\n") + "\n</svg>\n"
  );
}
