/**
 * Minimal reader for the simulator's CSV outputs: an optional leading
 * `#`-comment line, a header row, then plain comma-separated values
 * (no quoting is used by the producers).
 */

export interface Table {
  comment: string | null;
  columns: string[];
  rows: Record<string, string>[];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  let comment: string | null = null;
  let i = 0;
  while (i < lines.length && lines[i].startsWith("#")) {
    comment = comment === null ? lines[i] : comment + "\n" + lines[i];
    i += 1;
  }
  if (i >= lines.length) {
    throw new SchemaError("input has no header row");
  }
  const columns = lines[i].split(",").map((c) => c.trim());
  const rows: Record<string, string>[] = [];
  for (const line of lines.slice(i + 1)) {
    const cells = line.split(",");
    if (cells.length !== columns.length) {
      throw new SchemaError(
        `row has ${cells.length} cells but the header names ${columns.length} columns: ${line}`,
      );
    }
    const row: Record<string, string> = {};
    columns.forEach((c, j) => (row[c] = cells[j]));
    rows.push(row);
  }
  return { comment, columns, rows };
}

export function requireColumns(table: Table, needed: string[]): void {
  const missing = needed.filter((c) => !table.columns.includes(c));
  if (missing.length > 0) {
    throw new SchemaError(
      `missing column(s) ${missing.join(", ")}; file provides: ${table.columns.join(", ")}`,
    );
  }
}

export function num(row: Record<string, string>, column: string): number {
  const v = Number(row[column]);
  if (!Number.isFinite(v)) {
    throw new SchemaError(`column ${column} holds non-numeric value ${row[column]!}`);
  }
  return v;
}
