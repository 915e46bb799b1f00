export { SchemaError } from "./errors.js";
export { parseCsv, columnIndex, numericColumn } from "./csv.js";
export type { Table } from "./csv.js";
export { renderTimeseries } from "./timeseries.js";
export { renderConvergence } from "./convergence.js";
export { renderBench } from "./bench.js";
export type { BenchLine } from "./bench.js";
export { main, KINDS } from "./cli.js";
