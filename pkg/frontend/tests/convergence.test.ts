import { describe, expect, it } from "vitest";

import { SchemaError, renderConvergence } from "../src/index.js";
import { fixture } from "./helpers.js";

const AGG = fixture("aggregate.csv");
const SLOPES = fixture("slopes.csv");

/** data-slope attributes keyed by "x|fixed|y", exactly as rendered. */
function extractSlopes(svg: string): Map<string, string> {
  const out = new Map<string, string>();
  const re = /data-x="([^"]+)" data-fixed="([^"]+)" data-y="([^"]+)" data-slope="([^"]+)"/g;
  for (const m of svg.matchAll(re)) {
    out.set(`${m[1]}|${m[2]}|${m[3]}`, m[4]);
  }
  return out;
}

describe("renderConvergence", () => {
  it("carries every stored slope into an annotation, equal to 1e-12", () => {
    const svg = renderConvergence(AGG, SLOPES);
    const shown = extractSlopes(svg);
    const rows = SLOPES.trim().split("\n").slice(1);
    expect(shown.size).toBe(rows.length);
    for (const row of rows) {
      const [x, fixed, y, slope] = row.split(",");
      const attr = shown.get(`${x}|${fixed}|${y}`);
      expect(attr).toBeDefined();
      expect(Math.abs(Number(attr) - Number(slope))).toBeLessThanOrEqual(1e-12);
    }
  });

  it("matches a hand-computed rise over run on a two-point fit", () => {
    // the fixture sweep holds two eps values per hbar, so each stored slope
    // is a two-point fit: slope = (ln y1 - ln y0) / (ln x1 - ln x0)
    const rows = AGG.trim()
      .split("\n")
      .slice(1)
      .map((line) => line.split(",").map(Number));
    const hbar = rows[0][0];
    const pts = rows.filter((r) => r[0] === hbar).map((r) => ({ eps: r[1], supG: r[2] }));
    expect(pts).toHaveLength(2);
    const hand =
      (Math.log(pts[1].supG) - Math.log(pts[0].supG)) / (Math.log(pts[1].eps) - Math.log(pts[0].eps));

    const shown = extractSlopes(renderConvergence(AGG, SLOPES));
    const key = [...shown.keys()].find((k) => k.startsWith("eps|") && k.endsWith("|sup_G"));
    expect(key).toBeDefined();
    expect(Number(shown.get(key!))).toBeCloseTo(hand, 12);
  });

  it("shows slope 2.000 for an exact square-law fixture", () => {
    const svg = renderConvergence(fixture("aggregate_eps2.csv"), fixture("slopes_eps2.csv"));
    const shown = extractSlopes(svg);
    expect(shown.size).toBe(3);
    for (const value of shown.values()) {
      expect(Math.abs(Number(value) - 2.0)).toBeLessThanOrEqual(1e-9);
    }
    expect(svg).toContain("slope 2.000");
  });

  it("rejects an aggregate without the eps column", () => {
    const lines = AGG.trim().split("\n");
    const dropped = lines
      .map((line) => {
        const cells = line.split(",");
        cells.splice(1, 1);
        return cells.join(",");
      })
      .join("\n");
    expect(() => renderConvergence(dropped, SLOPES)).toThrow(SchemaError);
    expect(() => renderConvergence(dropped, SLOPES)).toThrow(/"eps"/);
  });

  it("rejects an empty aggregate", () => {
    expect(() => renderConvergence("hbar,eps,sup_G,dev_rho,dev_J,scaling\n", SLOPES)).toThrow(
      SchemaError,
    );
  });

  it("is byte-stable across renders", () => {
    expect(renderConvergence(AGG, SLOPES)).toBe(renderConvergence(AGG, SLOPES));
  });
});
