/**
 * Convergence figure.
 *
 * Two log-log panels from a sweep's aggregate.csv: sup_t G and the final
 * deviation norms against eps (left, one polyline per hbar level) and
 * against hbar (right, one per eps level). The slope annotations under each
 * panel are copied verbatim from slopes.csv into data-slope attributes;
 * this tool never refits anything, it only displays what the sweep stored.
 */

import { columnIndex, numericColumn, parseCsv, Table } from "./csv.js";
import { SchemaError } from "./errors.js";
import { log10Scale, logLabel, positiveFloor } from "./scale.js";
import { escapeText, label, px, svgDocument, tag } from "./svg.js";

const QUANTITIES = [
  { name: "sup_G", color: "#1f6fb4" },
  { name: "dev_rho", color: "#2ca02c" },
  { name: "dev_J", color: "#d62728" },
] as const;

interface SlopeRow {
  x: string;
  fixed: string;
  y: string;
  slope: string; // raw cell, displayed rounded but stored exactly
}

interface Panel {
  x0: number;
  x1: number;
  xName: "eps" | "hbar";
  groupBy: "hbar" | "eps";
}

const TOP = 48;
const BOTTOM = 300;
const WIDTH = 780;

/** "hbar=0.040000000000000001" shortened for display to "hbar=0.04". */
function shortFixed(fixed: string): string {
  const eq = fixed.indexOf("=");
  if (eq < 0) return fixed;
  const v = Number(fixed.slice(eq + 1));
  if (!Number.isFinite(v)) return fixed;
  return `${fixed.slice(0, eq)}=${label(v)}`;
}

function panelMarkup(table: Table, panel: Panel, body: string[]): void {
  const xs = numericColumn(table, panel.xName, "aggregate.csv");
  const groupIdx = columnIndex(table, panel.groupBy, "aggregate.csv");
  const values: Record<string, number[]> = {};
  for (const q of QUANTITIES) {
    values[q.name] = numericColumn(table, q.name, "aggregate.csv");
  }

  const all = QUANTITIES.flatMap((q) => values[q.name]);
  const floor = positiveFloor(all);
  const yScale = log10Scale(floor / 2, Math.max(...all, floor) * 2, BOTTOM, TOP);
  const xSorted = [...new Set(xs)].sort((a, b) => a - b);
  const xScale = log10Scale(
    xSorted[0] / 1.25,
    xSorted[xSorted.length - 1] * 1.25,
    panel.x0,
    panel.x1,
  );

  body.push(
    tag("rect", {
      x: panel.x0,
      y: TOP,
      width: panel.x1 - panel.x0,
      height: BOTTOM - TOP,
      fill: "none",
      stroke: "#999",
    }),
  );
  for (const tick of xSorted) {
    const cx = px(xScale.map(tick));
    body.push(tag("line", { x1: cx, x2: cx, y1: BOTTOM, y2: BOTTOM + 4, stroke: "#555" }));
    body.push(tag("text", { x: cx, y: BOTTOM + 17, "text-anchor": "middle", fill: "#333" }, label(tick)));
  }
  for (const tick of yScale.ticks) {
    const cy = px(yScale.map(tick));
    body.push(tag("line", { x1: panel.x0, x2: panel.x1, y1: cy, y2: cy, stroke: "#eee" }));
    body.push(
      tag(
        "text",
        { x: panel.x0 - 6, y: cy, "text-anchor": "end", "dominant-baseline": "middle", fill: "#333" },
        logLabel(tick),
      ),
    );
  }
  body.push(
    tag(
      "text",
      { x: (panel.x0 + panel.x1) / 2, y: BOTTOM + 34, "text-anchor": "middle", fill: "#333" },
      escapeText(panel.xName),
    ),
  );

  // group rows by the frozen variable, preserving first-seen order
  const groups = new Map<string, number[]>();
  table.rows.forEach((row, i) => {
    const key = row[groupIdx];
    const got = groups.get(key);
    if (got) got.push(i);
    else groups.set(key, [i]);
  });

  for (const q of QUANTITIES) {
    for (const indices of groups.values()) {
      const pts = indices
        .map((i) => ({ x: xs[i], y: values[q.name][i] }))
        .sort((a, b) => a.x - b.x)
        .map((p) => {
          const v = p.y > 0 ? p.y : floor;
          return `${px(xScale.map(p.x))},${px(yScale.map(v))}`;
        });
      body.push(
        tag("polyline", {
          points: pts.join(" "),
          fill: "none",
          stroke: q.color,
          "stroke-width": 1.2,
        }),
      );
      pts.forEach((p) => {
        const [cx, cy] = p.split(",");
        body.push(tag("circle", { class: `pt q-${q.name}`, cx, cy, r: 2.5, fill: q.color }));
      });
    }
  }
}

function parseSlopes(slopesText: string): SlopeRow[] {
  const table = parseCsv(slopesText, "slopes.csv");
  const ix = columnIndex(table, "x", "slopes.csv");
  const ifx = columnIndex(table, "fixed", "slopes.csv");
  const iy = columnIndex(table, "y", "slopes.csv");
  const isl = columnIndex(table, "slope", "slopes.csv");
  columnIndex(table, "residual", "slopes.csv");
  return table.rows.map((row) => ({ x: row[ix], fixed: row[ifx], y: row[iy], slope: row[isl] }));
}

export function renderConvergence(aggregateText: string, slopesText: string): string {
  const table = parseCsv(aggregateText, "aggregate.csv");
  if (table.rows.length === 0) {
    throw new SchemaError("aggregate.csv: no data rows");
  }
  const slopes = parseSlopes(slopesText);

  const panels: Panel[] = [
    { x0: 70, x1: 380, xName: "eps", groupBy: "hbar" },
    { x0: 450, x1: 760, xName: "hbar", groupBy: "eps" },
  ];

  const perPanel = panels.map((p) => slopes.filter((s) => s.x === p.xName));
  const noteLines = Math.max(perPanel[0].length, perPanel[1].length);
  const height = BOTTOM + 52 + 14 * noteLines + 14;

  const body: string[] = [];
  body.push(tag("rect", { x: 0, y: 0, width: WIDTH, height, fill: "white" }));
  body.push(
    tag(
      "text",
      { x: 70, y: 22, "font-size": "14", fill: "#222" },
      escapeText("sweep convergence, log-log"),
    ),
  );
  let legendX = 360;
  for (const q of QUANTITIES) {
    body.push(tag("line", { x1: legendX, x2: legendX + 18, y1: 18, y2: 18, stroke: q.color, "stroke-width": 2 }));
    body.push(tag("text", { x: legendX + 22, y: 22, fill: "#222" }, escapeText(q.name)));
    legendX += 24 + 10 * q.name.length;
  }

  panels.forEach((panel, pi) => {
    panelMarkup(table, panel, body);
    let noteY = BOTTOM + 52;
    for (const s of perPanel[pi]) {
      const pretty = Number(s.slope).toPrecision(4);
      body.push(
        tag(
          "text",
          {
            class: "slope-note",
            "data-x": s.x,
            "data-fixed": s.fixed,
            "data-y": s.y,
            "data-slope": s.slope,
            x: panel.x0,
            y: noteY,
            fill: "#222",
          },
          escapeText(`${s.y} @ ${shortFixed(s.fixed)}: slope ${pretty}`),
        ),
      );
      noteY += 14;
    }
  });

  return svgDocument(WIDTH, height, body);
}
