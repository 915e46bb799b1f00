import { existsSync, mkdtempSync, readFileSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { main } from "../src/index.js";
import { fixturePath } from "./helpers.js";

const FIXTURES = fixturePath();
const scratch = mkdtempSync(join(tmpdir(), "figures-"));

beforeEach(() => {
  vi.spyOn(process.stdout, "write").mockReturnValue(true);
  vi.spyOn(process.stderr, "write").mockReturnValue(true);
});

afterEach(() => {
  vi.restoreAllMocks();
});

afterAll(() => {
  rmSync(scratch, { recursive: true, force: true });
});

describe("figures CLI", () => {
  it("renders all three kinds from one artifact directory", () => {
    for (const kind of ["timeseries", "convergence", "bench"] as const) {
      const out = join(scratch, `${kind}.svg`);
      expect(main([kind, "--in", FIXTURES, "--out", out])).toBe(0);
      const svg = readFileSync(out, "utf8");
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg).toContain('xmlns="http://www.w3.org/2000/svg"');
    }
  });

  it("writes byte-identical output on repeated invocations", () => {
    const a = join(scratch, "a.svg");
    const b = join(scratch, "b.svg");
    expect(main(["timeseries", "--in", FIXTURES, "--out", a])).toBe(0);
    expect(main(["timeseries", "--in", FIXTURES, "--out", b])).toBe(0);
    expect(readFileSync(b)).toEqual(readFileSync(a));
  });

  it("picks up summary.json for the bench figure when present", () => {
    const out = join(scratch, "bench_spread.svg");
    expect(main(["bench", "--in", FIXTURES, "--out", out])).toBe(0);
    expect(readFileSync(out, "utf8")).toContain("spread-note");
  });

  it("fails usage problems with exit code 2 and writes nothing", () => {
    const out = join(scratch, "never.svg");
    expect(main(["histogram", "--in", FIXTURES, "--out", out])).toBe(2);
    expect(main(["timeseries", "--in", FIXTURES])).toBe(2);
    expect(main(["timeseries", "--out", out])).toBe(2);
    expect(main(["timeseries", "--in", FIXTURES, "--out", out, "extra"])).toBe(2);
    expect(main(["timeseries", "--bogus", "x", "--in", FIXTURES, "--out", out])).toBe(2);
    expect(existsSync(out)).toBe(false);
  });

  it("fails cleanly when the artifact directory lacks the input file", () => {
    const empty = mkdtempSync(join(tmpdir(), "figures-empty-"));
    const out = join(scratch, "missing.svg");
    try {
      expect(main(["timeseries", "--in", empty, "--out", out])).toBe(2);
      expect(existsSync(out)).toBe(false);
    } finally {
      rmSync(empty, { recursive: true, force: true });
    }
  });
});
