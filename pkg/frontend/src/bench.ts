/**
 * Bench constant-stability figure.
 *
 * Scatter of the fitted constants from bench.jsonl, one circle per
 * (N, seed) line, N on a log2 abscissa, with a short horizontal marker at
 * each N's max. When the run's summary.json is supplied its fitted_spread
 * lands in an annotation (data-spread holds the stored value verbatim);
 * the figure itself never recomputes the spread.
 */

import { SchemaError } from "./errors.js";
import { linearScale } from "./scale.js";
import { escapeText, label, px, svgDocument, tag } from "./svg.js";

export interface BenchLine {
  kind: string;
  N: number;
  fitted: number;
  seed: number;
}

const WIDTH = 640;
const HEIGHT = 420;
const PLOT = { left: 80, right: 610, top: 48, bottom: 370 };

function parseLines(jsonlText: string): BenchLine[] {
  const lines = jsonlText.split(/\r?\n/).filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaError("bench.jsonl: file is empty");
  }
  return lines.map((line, i) => {
    let raw: unknown;
    try {
      raw = JSON.parse(line);
    } catch {
      throw new SchemaError(`bench.jsonl: line ${i + 1} is not valid JSON`);
    }
    const obj = raw as Record<string, unknown>;
    for (const key of ["kind", "N", "fitted", "seed"]) {
      if (!(key in obj)) {
        throw new SchemaError(`bench.jsonl: line ${i + 1} missing field "${key}"`);
      }
    }
    if (typeof obj.N !== "number" || typeof obj.fitted !== "number" || !Number.isFinite(obj.fitted)) {
      throw new SchemaError(`bench.jsonl: line ${i + 1} has non-numeric N or fitted`);
    }
    return {
      kind: String(obj.kind),
      N: obj.N,
      fitted: obj.fitted,
      seed: Number(obj.seed),
    };
  });
}

export function renderBench(jsonlText: string, summaryText?: string): string {
  const lines = parseLines(jsonlText);
  const kinds = [...new Set(lines.map((l) => l.kind))];
  const sizes = [...new Set(lines.map((l) => l.N))].sort((a, b) => a - b);

  const lo = Math.log2(sizes[0]);
  const hi = Math.log2(sizes[sizes.length - 1]);
  const x = linearScale(lo - 0.5, hi + 0.5, PLOT.left, PLOT.right);
  const maxFitted = Math.max(...lines.map((l) => l.fitted), 0);
  const minFitted = Math.min(...lines.map((l) => l.fitted), 0);
  const y = linearScale(minFitted, maxFitted * 1.15 || 1, PLOT.bottom, PLOT.top);

  const body: string[] = [];
  body.push(tag("rect", { x: 0, y: 0, width: WIDTH, height: HEIGHT, fill: "white" }));
  body.push(
    tag(
      "text",
      { x: PLOT.left, y: 22, "font-size": "14", fill: "#222" },
      escapeText(`bench constants: ${kinds.join(", ")}`),
    ),
  );
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

  for (const n of sizes) {
    const cx = px(x.map(Math.log2(n)));
    body.push(tag("line", { x1: cx, x2: cx, y1: PLOT.bottom, y2: PLOT.bottom + 4, stroke: "#555" }));
    body.push(tag("text", { x: cx, y: PLOT.bottom + 17, "text-anchor": "middle", fill: "#333" }, String(n)));
  }
  for (const tick of y.ticks) {
    const cy = px(y.map(tick));
    body.push(tag("line", { x1: PLOT.left, x2: PLOT.right, y1: cy, y2: cy, stroke: "#eee" }));
    body.push(
      tag(
        "text",
        { x: PLOT.left - 6, y: cy, "text-anchor": "end", "dominant-baseline": "middle", fill: "#333" },
        label(tick),
      ),
    );
  }
  body.push(
    tag(
      "text",
      { x: (PLOT.left + PLOT.right) / 2, y: HEIGHT - 10, "text-anchor": "middle", fill: "#333" },
      "N",
    ),
  );
  body.push(
    tag(
      "text",
      { x: 18, y: (PLOT.top + PLOT.bottom) / 2, "text-anchor": "middle", fill: "#333", transform: `rotate(-90 18 ${(PLOT.top + PLOT.bottom) / 2})` },
      "fitted",
    ),
  );

  for (const line of lines) {
    body.push(
      tag("circle", {
        class: "pt bench",
        cx: px(x.map(Math.log2(line.N))),
        cy: px(y.map(line.fitted)),
        r: 3,
        fill: "#1f6fb4",
        "fill-opacity": 0.6,
      }),
    );
  }
  // per-N max marker, drawn from the plotted points
  for (const n of sizes) {
    const peak = Math.max(...lines.filter((l) => l.N === n).map((l) => l.fitted));
    const cx = x.map(Math.log2(n));
    const cy = px(y.map(peak));
    body.push(
      tag("line", {
        class: "n-max",
        x1: px(cx - 14),
        x2: px(cx + 14),
        y1: cy,
        y2: cy,
        stroke: "#d62728",
        "stroke-width": 2,
      }),
    );
  }

  if (summaryText !== undefined) {
    let summary: Record<string, unknown>;
    try {
      summary = JSON.parse(summaryText) as Record<string, unknown>;
    } catch {
      throw new SchemaError("summary.json: not valid JSON");
    }
    const spread = summary["fitted_spread"];
    if (typeof spread !== "number") {
      throw new SchemaError('summary.json: missing numeric "fitted_spread"');
    }
    body.push(
      tag(
        "text",
        {
          class: "spread-note",
          "data-spread": String(spread),
          x: PLOT.right,
          y: 22,
          "text-anchor": "end",
          fill: "#222",
          "font-style": "italic",
        },
        escapeText(`per-N max spread x${Number(spread).toPrecision(4)}`),
      ),
    );
  }

  return svgDocument(WIDTH, HEIGHT, body);
}
