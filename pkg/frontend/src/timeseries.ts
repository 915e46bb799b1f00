/**
 * Energy time-series figure.
 *
 * Input is a run.csv with columns t, kinetic, potential, total and
 * gronwall_rhs (deviation columns may be present; they are not plotted
 * here). Each series gets a polyline plus one circle per CSV row on a log
 * ordinate. When total <= gronwall_rhs holds at every sampled time the
 * legend gains a "Gronwall margin >= 0" line, so the bound can be read off
 * the figure without opening the CSV.
 */

import { numericColumn, parseCsv } from "./csv.js";
import { SchemaError } from "./errors.js";
import { linearScale, log10Scale, logLabel, positiveFloor, Scale } from "./scale.js";
import { escapeText, label, px, svgDocument, tag } from "./svg.js";

const WIDTH = 720;
const HEIGHT = 440;
const PLOT = { left: 70, right: 700, top: 48, bottom: 388 };

interface Series {
  name: string;
  color: string;
  dash?: string;
  values: number[];
}

function seriesMarkup(s: Series, t: number[], x: Scale, y: Scale, floor: number): string[] {
  const pts = t.map((ti, i) => {
    const v = s.values[i] > 0 ? s.values[i] : floor;
    return `${px(x.map(ti))},${px(y.map(v))}`;
  });
  const line: Record<string, string | number> = {
    points: pts.join(" "),
    fill: "none",
    stroke: s.color,
    "stroke-width": 1.5,
  };
  if (s.dash) line["stroke-dasharray"] = s.dash;
  const out = [tag("polyline", line)];
  pts.forEach((p) => {
    const [cx, cy] = p.split(",");
    out.push(tag("circle", { class: `pt s-${s.name}`, cx, cy, r: 2.5, fill: s.color }));
  });
  return out;
}

export function renderTimeseries(csvText: string): string {
  const table = parseCsv(csvText, "run.csv");
  if (table.rows.length === 0) {
    throw new SchemaError("run.csv: no data rows");
  }
  const t = numericColumn(table, "t", "run.csv");
  const series: Series[] = [
    { name: "total", color: "#1f6fb4", values: numericColumn(table, "total", "run.csv") },
    { name: "kinetic", color: "#2ca02c", values: numericColumn(table, "kinetic", "run.csv") },
    { name: "potential", color: "#d62728", values: numericColumn(table, "potential", "run.csv") },
    {
      name: "gronwall_rhs",
      color: "#555555",
      dash: "5,3",
      values: numericColumn(table, "gronwall_rhs", "run.csv"),
    },
  ];

  const everything = series.flatMap((s) => s.values);
  const floor = positiveFloor(everything);
  const top = Math.max(...everything, floor);
  const x = linearScale(Math.min(...t), Math.max(...t), PLOT.left, PLOT.right);
  const y = log10Scale(floor / 1.5, top * 1.5, PLOT.bottom, PLOT.top);

  const body: string[] = [];
  body.push(tag("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "white" }));
  body.push(
    tag(
      "text",
      { x: PLOT.left, y: 22, "font-size": "14", fill: "#222" },
      escapeText("modulated energy vs Gronwall envelope"),
    ),
  );

  // frame and ticks
  body.push(
    tag("rect", {
      x: PLOT.left,
      y: PLOT.top,
      width: PLOT.right - PLOT.left,
      height: PLOT.bottom - PLOT.top,
      fill: "none",
      stroke: "#999",
    }),
  );
  for (const tick of x.ticks) {
    const cx = px(x.map(tick));
    body.push(tag("line", { x1: cx, x2: cx, y1: PLOT.bottom, y2: PLOT.bottom + 4, stroke: "#555" }));
    body.push(
      tag("text", { x: cx, y: PLOT.bottom + 17, "text-anchor": "middle", fill: "#333" }, label(tick)),
    );
  }
  for (const tick of y.ticks) {
    const cy = px(y.map(tick));
    body.push(
      tag("line", { x1: PLOT.left, x2: PLOT.right, y1: cy, y2: cy, stroke: "#eee" }),
    );
    body.push(
      tag(
        "text",
        { x: PLOT.left - 6, y: cy, "text-anchor": "end", "dominant-baseline": "middle", fill: "#333" },
        logLabel(tick),
      ),
    );
  }
  body.push(
    tag(
      "text",
      { x: (PLOT.left + PLOT.right) / 2, y: HEIGHT - 10, "text-anchor": "middle", fill: "#333" },
      "t",
    ),
  );

  for (const s of series) {
    body.push(...seriesMarkup(s, t, x, y, floor));
  }

  // legend, top right
  const legendX = PLOT.right - 150;
  let legendY = PLOT.top + 16;
  for (const s of series) {
    body.push(tag("line", { x1: legendX, x2: legendX + 18, y1: legendY - 4, y2: legendY - 4, stroke: s.color, "stroke-width": 2 }));
    body.push(tag("text", { x: legendX + 24, y: legendY, fill: "#222" }, escapeText(s.name)));
    legendY += 15;
  }
  const rhs = series[3].values;
  const total = series[0].values;
  if (total.every((v, i) => v <= rhs[i])) {
    body.push(
      tag(
        "text",
        { class: "margin-note", x: legendX, y: legendY + 3, fill: "#222", "font-style": "italic" },
        escapeText("Gronwall margin ≥ 0"),
      ),
    );
  }

  return svgDocument(WIDTH, HEIGHT, body);
}
