import { mkdirSync, writeFileSync } from "fs";
import { dirname } from "path";

import { DataTable, numbers, readJsonl, readTable } from "./csv.js";
import { FigureSpec, validateSpec } from "./spec.js";
import {
  annotation, document, el, fmtTick, frame, legendEntry, polyline, text,
} from "./svg.js";
import {
  BAND_COLOR, BAND_OPACITY, FAN_COLOR, FAN_OPACITY, HEIGHT, LIMIT_COLOR,
  MARGIN, SERIES_COLORS, SKELETON_COLOR, WIDTH,
} from "./style.js";

const seriesColor = (i: number): string => SERIES_COLORS[i % SERIES_COLORS.length];

const firstCell = (table: DataTable, name: string): string => {
  const idx = table.header.indexOf(name);
  if (idx < 0) throw new Error(`missing column '${name}' in ${table.path}`);
  return table.cells[0][idx];
};

/** Log-log scatter of report statistics with the report's own fitted line.

    Never recomputes a fit: the drawn line and the annotated slope come
    from the slope/intercept cells of the input CSV. */
export function plotSlope(spec: FigureSpec): string {
  const tables = (spec.files ?? []).map(readTable);
  const series = tables.map((table) => {
    const xName = table.header[1];
    return {
      label: firstCell(table, "experiment"),
      xName,
      xs: numbers(table, xName),
      ys: numbers(table, "statistic"),
      errs: numbers(table, "std_err"),
      slope: Number(firstCell(table, "slope")),
      intercept: Number(firstCell(table, "intercept")),
    };
  });
  const allX = series.flatMap((s) => s.xs);
  const allY = series.flatMap((s) => s.ys).filter((v) => v > 0);
  const fr = frame(allX, allY, {
    logX: true, logY: true,
    title: spec.options?.title ?? "deviation statistic vs noise scale",
    xLabel: series[0].xName, yLabel: "statistic",
  });
  const parts = [...fr.parts];
  series.forEach((s, i) => {
    const color = seriesColor(i);
    const lo = Math.min(...s.xs);
    const hi = Math.max(...s.xs);
    if (Number.isFinite(s.slope)) {
      const line: Array<[number, number]> = [lo, hi].map((x) => [
        fr.x.map(x), fr.y.map(Math.exp(s.intercept + s.slope * Math.log(x))),
      ]);
      parts.push(polyline(line, { stroke: color, "stroke-width": 1.5, class: "fit-line" }));
    }
    s.xs.forEach((x, j) => {
      const y = s.ys[j];
      if (y <= 0) return;
      if (s.errs[j] > 0 && y - s.errs[j] > 0) {
        parts.push(el("line", {
          x1: fr.x.map(x).toFixed(2), x2: fr.x.map(x).toFixed(2),
          y1: fr.y.map(y - s.errs[j]).toFixed(2), y2: fr.y.map(y + s.errs[j]).toFixed(2),
          stroke: color,
        }));
      }
      parts.push(el("circle", {
        cx: fr.x.map(x).toFixed(2), cy: fr.y.map(y).toFixed(2), r: 3.2,
        fill: color, class: "data-point",
      }));
    });
    parts.push(legendEntry(MARGIN.left + 12, MARGIN.top + 16 + 18 * i, color, s.label));
    parts.push(annotation(
      WIDTH - MARGIN.right - 190, MARGIN.top + 16 + 18 * i,
      `${s.label}: slope = ${s.slope.toFixed(3)}`, color,
    ));
  });
  return document(parts);
}

/** Translucent fan of particle paths with limit/skeleton overlays.

    At most `max_paths` (default 200) paths are drawn; the annotation
    records how many of the available paths that is. */
export function plotTrajectoryFan(spec: FigureSpec): string {
  const table = readTable(spec.particles as string);
  const coord = spec.options?.coordinate ?? 0;
  const ts = numbers(table, "t");
  const ids = numbers(table, "particle");
  const vals = numbers(table, `x${coord}`);
  const byParticle = new Map<number, Array<[number, number]>>();
  ids.forEach((id, row) => {
    let path = byParticle.get(id);
    if (!path) {
      path = [];
      byParticle.set(id, path);
    }
    path.push([ts[row], vals[row]]);
  });
  const allIds = [...byParticle.keys()].sort((a, b) => a - b);
  const cap = spec.options?.max_paths ?? 200;
  const drawnIds = allIds.slice(0, cap);

  const overlays: Array<{ label: string; color: string; dash?: string; pts: Array<[number, number]>; cls: string }> = [];
  for (const [key, path, color, dash, cls] of [
    ["limit", spec.limit, LIMIT_COLOR, undefined, "limit-path"],
    ["skeleton", spec.skeleton, SKELETON_COLOR, "6,4", "skeleton-path"],
  ] as const) {
    if (path) {
      const t = readTable(path);
      const tv = numbers(t, "t");
      const xv = numbers(t, `x${coord}`);
      overlays.push({
        label: key, color, dash, cls,
        pts: tv.map((time, i) => [time, xv[i]]),
      });
    }
  }

  const fanPts = drawnIds.flatMap((id) => byParticle.get(id) as Array<[number, number]>);
  const allY = fanPts.map(([, v]) => v).concat(overlays.flatMap((o) => o.pts.map(([, v]) => v)));
  const fr = frame(ts, allY, {
    title: spec.options?.title ?? "particle paths",
    xLabel: "t", yLabel: `x${coord}`,
  });
  const parts = [...fr.parts];
  for (const id of drawnIds) {
    const pts = (byParticle.get(id) as Array<[number, number]>).map(
      ([t, v]) => [fr.x.map(t), fr.y.map(v)] as [number, number]);
    parts.push(polyline(pts, {
      stroke: FAN_COLOR, "stroke-opacity": FAN_OPACITY, class: "fan-path",
    }));
  }
  overlays.forEach((o, i) => {
    const pts = o.pts.map(([t, v]) => [fr.x.map(t), fr.y.map(v)] as [number, number]);
    const attrs: Record<string, string | number> = {
      stroke: o.color, "stroke-width": 2, class: o.cls,
    };
    if (o.dash) attrs["stroke-dasharray"] = o.dash;
    parts.push(polyline(pts, attrs));
    parts.push(legendEntry(MARGIN.left + 12, MARGIN.top + 34 + 18 * i, o.color, o.label));
  });
  parts.push(legendEntry(MARGIN.left + 12, MARGIN.top + 16, FAN_COLOR, "particles"));
  parts.push(annotation(WIDTH - MARGIN.right - 190, MARGIN.top + 16,
                        `paths drawn = ${drawnIds.length} / ${allIds.length}`));
  return document(parts);
}

/** Minimized action against the Monte Carlo decay rate across noise levels.

    The horizontal line is the report's action; the shaded band spans
    ±15% of it; each point is a rare-event row's -eps·log(p_hat) cell. */
export function plotRateVsMc(spec: FigureSpec): string {
  const records = readJsonl(spec.rate_summary as string);
  const rate = records.find((r) => r["command"] === "rate_min");
  if (!rate || typeof rate["action"] !== "number") {
    throw new Error(`no rate_min action found in ${spec.rate_summary}`);
  }
  const action = rate["action"];
  const rows: Array<{ eps: number; value: number }> = [];
  for (const file of spec.rare_files ?? []) {
    const table = readTable(file);
    const eps = numbers(table, "eps");
    const neg = numbers(table, "neg_eps_log_p");
    eps.forEach((e, i) => {
      if (Number.isFinite(neg[i])) rows.push({ eps: e, value: neg[i] });
    });
  }
  if (rows.length === 0) {
    throw new Error("no finite rare-event rates to draw");
  }
  const ys = rows.map((r) => r.value).concat([action * 0.8, action * 1.2]);
  const fr = frame(rows.map((r) => r.eps), ys, {
    logX: true,
    title: spec.options?.title ?? "action vs Monte Carlo decay rate",
    xLabel: "eps", yLabel: "-eps·log p",
  });
  const parts = [...fr.parts];
  const x0 = MARGIN.left;
  const x1 = WIDTH - MARGIN.right;
  const bandTop = fr.y.map(action * 1.15);
  const bandBot = fr.y.map(action * 0.85);
  parts.push(el("rect", {
    x: x0, y: bandTop.toFixed(2), width: x1 - x0,
    height: (bandBot - bandTop).toFixed(2),
    fill: BAND_COLOR, "fill-opacity": BAND_OPACITY, class: "band",
  }));
  parts.push(el("line", {
    x1: x0, x2: x1, y1: fr.y.map(action).toFixed(2), y2: fr.y.map(action).toFixed(2),
    stroke: BAND_COLOR, "stroke-width": 2, "stroke-dasharray": "6,4", class: "rate-line",
  }));
  parts.push(annotation(MARGIN.left + 12, MARGIN.top + 16,
                        `I* = ${action.toFixed(3)}`, BAND_COLOR));
  rows.forEach((row, i) => {
    parts.push(el("circle", {
      cx: fr.x.map(row.eps).toFixed(2), cy: fr.y.map(row.value).toFixed(2), r: 4,
      fill: SERIES_COLORS[0], class: "mc-point",
    }));
    parts.push(annotation(MARGIN.left + 12, MARGIN.top + 34 + 18 * i,
                          `eps=${fmtTick(row.eps)}: -eps·log p = ${row.value.toFixed(3)}`));
  });
  return document(parts);
}

/** Skeleton sup-distances against the oscillation index, log-log. */
export function plotContinuity(spec: FigureSpec): string {
  const tables = (spec.files ?? []).map(readTable);
  const series = tables.map((table) => ({
    label: firstCell(table, "experiment"),
    ns: numbers(table, "n"),
    ds: numbers(table, "distance"),
  }));
  const allN = series.flatMap((s) => s.ns);
  const allD = series.flatMap((s) => s.ds).filter((v) => v > 0);
  if (allD.length === 0) {
    throw new Error("continuity figure needs positive distances");
  }
  const fr = frame(allN, allD, {
    logX: true, logY: true,
    title: spec.options?.title ?? "skeleton distance vs oscillation index",
    xLabel: "n", yLabel: "sup distance",
  });
  const parts = [...fr.parts];
  series.forEach((s, i) => {
    const color = seriesColor(i);
    const pts = s.ns
      .map((n, j) => [n, s.ds[j]] as [number, number])
      .filter(([, d]) => d > 0)
      .map(([n, d]) => [fr.x.map(n), fr.y.map(d)] as [number, number]);
    parts.push(polyline(pts, { stroke: color, "stroke-width": 1.5 }));
    for (const [px, py] of pts) {
      parts.push(el("circle", {
        cx: px.toFixed(2), cy: py.toFixed(2), r: 3.2, fill: color, class: "cont-point",
      }));
    }
    parts.push(legendEntry(MARGIN.left + 12, MARGIN.top + 16 + 18 * i, color, s.label));
    s.ns.forEach((n, j) => {
      parts.push(annotation(
        WIDTH - MARGIN.right - 190,
        MARGIN.top + 16 + 18 * (i * s.ns.length + j),
        `n=${fmtTick(n)}: d = ${s.ds[j].toFixed(3)}`, color,
      ));
    });
  });
  return document(parts);
}

export function renderFigure(spec: FigureSpec): string {
  validateSpec(spec);
  switch (spec.kind) {
    case "slope":
      return plotSlope(spec);
    case "trajectory_fan":
      return plotTrajectoryFan(spec);
    case "rate_vs_mc":
      return plotRateVsMc(spec);
    case "continuity":
      return plotContinuity(spec);
  }
}

export function writeFigure(spec: FigureSpec): string {
  const svg = renderFigure(spec);
  mkdirSync(dirname(spec.output), { recursive: true });
  writeFileSync(spec.output, svg);
  return spec.output;
}
