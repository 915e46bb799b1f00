/**
 * Minimal CSV access for the run artifacts.
 *
 * The writers on the simulation side never quote or escape cells, so a
 * plain comma split is exact here. Anything structurally off (ragged rows,
 * missing columns, non-numeric cells where numbers are required) is a
 * SchemaError, not a silent NaN.
 */

import { SchemaError } from "./errors.js";

export interface Table {
  header: string[];
  rows: string[][];
}

export function parseCsv(text: string, what: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new SchemaError(`${what}: file is empty`);
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  rows.forEach((row, i) => {
    if (row.length !== header.length) {
      throw new SchemaError(
        `${what}: row ${i + 1} has ${row.length} cells, header has ${header.length}`,
      );
    }
  });
  return { header, rows };
}

export function columnIndex(table: Table, name: string, what: string): number {
  const idx = table.header.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(`${what}: missing column "${name}"`);
  }
  return idx;
}

/** Column as finite numbers; the raw strings stay available via the table. */
export function numericColumn(table: Table, name: string, what: string): number[] {
  const idx = columnIndex(table, name, what);
  return table.rows.map((row, i) => {
    const v = Number(row[idx]);
    if (row[idx].trim() === "" || !Number.isFinite(v)) {
      throw new SchemaError(
        `${what}: row ${i + 1}, column "${name}" is not a finite number ("${row[idx]}")`,
      );
    }
    return v;
  });
}
