/** CSV ingestion for the simulation sweep outputs.
 *
 * The producer writes a single header row, '.' decimals, '\n' line ends and
 * no quoting, so parsing is a straight split. Schema violations are rejected
 * with the missing columns listed by name.
 */

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export class SchemaError extends Error {
  readonly missing: string[];
  constructor(figure: string, missing: string[]) {
    super(`figure ${figure}: missing required columns: ${missing.join(", ")}`);
    this.missing = missing;
  }
}

export function parseCsv(text: string): Table {
  const lines = text.split("\n").filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV: no header row");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    columns.forEach((c, i) => {
      row[c] = cells[i] ?? "";
    });
    return row;
  });
  return { columns, rows };
}

export function requireColumns(table: Table, figure: string, needed: string[]): void {
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(figure, missing);
  }
  if (table.rows.length === 0) {
    throw new Error(`figure ${figure}: CSV has no data rows`);
  }
}

export function num(row: Record<string, string>, column: string): number {
  const v = Number(row[column]);
  if (!Number.isFinite(v)) {
    throw new Error(`non-numeric value ${JSON.stringify(row[column])} in column ${column}`);
  }
  return v;
}
