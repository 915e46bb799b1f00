/**
 * Command line entry.
 *
 *   figures <kind> --in <dir> --out <file>
 *
 * kind is one of:
 *   timeseries    reads <dir>/run.csv
 *   convergence   reads <dir>/aggregate.csv and <dir>/slopes.csv
 *   bench         reads <dir>/bench.jsonl, plus <dir>/summary.json if present
 *
 * Exit code 0 on success, 2 for usage problems, unreadable inputs or
 * artifacts that fail schema checks.
 */

import { existsSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { renderBench } from "./bench.js";
import { renderConvergence } from "./convergence.js";
import { SchemaError } from "./errors.js";
import { renderTimeseries } from "./timeseries.js";

export const KINDS = ["timeseries", "convergence", "bench"] as const;

const USAGE = "usage: figures <timeseries|convergence|bench> --in <dir> --out <file>";

interface Args {
  kind: string;
  inDir: string;
  outFile: string;
}

function parseArgs(argv: string[]): Args | null {
  let kind = "";
  let inDir = "";
  let outFile = "";
  let i = 0;
  while (i < argv.length) {
    const arg = argv[i];
    if (arg === "--in" || arg === "--out") {
      const value = argv[i + 1];
      if (value === undefined) {
        process.stderr.write(`figures: ${arg} needs a value\n${USAGE}\n`);
        return null;
      }
      if (arg === "--in") inDir = value;
      else outFile = value;
      i += 2;
    } else if (arg.startsWith("-")) {
      process.stderr.write(`figures: unknown option ${arg}\n${USAGE}\n`);
      return null;
    } else if (kind === "") {
      kind = arg;
      i += 1;
    } else {
      process.stderr.write(`figures: unexpected argument ${arg}\n${USAGE}\n`);
      return null;
    }
  }
  if (kind === "" || inDir === "" || outFile === "") {
    process.stderr.write(`${USAGE}\n`);
    return null;
  }
  return { kind, inDir, outFile };
}

function render(kind: string, inDir: string): string {
  const read = (name: string) => readFileSync(join(inDir, name), "utf8");
  switch (kind) {
    case "timeseries":
      return renderTimeseries(read("run.csv"));
    case "convergence":
      return renderConvergence(read("aggregate.csv"), read("slopes.csv"));
    case "bench": {
      const summaryPath = join(inDir, "summary.json");
      const summary = existsSync(summaryPath) ? readFileSync(summaryPath, "utf8") : undefined;
      return renderBench(read("bench.jsonl"), summary);
    }
    default:
      throw new SchemaError(`unknown figure kind "${kind}" (expected ${KINDS.join(", ")})`);
  }
}

export function main(argv: string[]): number {
  const args = parseArgs(argv);
  if (args === null) return 2;
  let svg: string;
  try {
    svg = render(args.kind, args.inDir);
  } catch (err) {
    if (err instanceof SchemaError) {
      process.stderr.write(`figures: schema error: ${err.message}\n`);
      return 2;
    }
    if (err instanceof Error && "code" in err) {
      // fs errors: missing artifact, unreadable directory, and friends
      process.stderr.write(`figures: ${err.message}\n`);
      return 2;
    }
    throw err;
  }
  writeFileSync(args.outFile, svg);
  process.stdout.write(`wrote ${args.outFile}\n`);
  return 0;
}
