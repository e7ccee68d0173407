/**
 * figgen: render simulator CSVs into deterministic SVG figures.
 *
 *   node dist/figgen.js --in keygen.csv --out keygen.svg --kind agreement_vs_snr
 *
 * Kinds:
 *   rho_vs_gamma       auth-sweep CSV, one series per SNR
 *   agreement_vs_snr   keygen-sweep CSV, Alice-Bob/Eve-Bob x key length
 *   scenario_timeline  flag-log CSV, one series per detector
 *
 * Plots exactly the CSV values; nothing is recomputed.  On error nothing
 * is written and the process exits nonzero with a diagnostic.
 */
import { readFileSync, writeFileSync } from "node:fs";
import { parseArgs } from "node:util";

import { num, parseCsv, requireColumns, SchemaError, Table } from "./csv.js";
import { renderPlot, Series } from "./svg.js";

export const KINDS = ["rho_vs_gamma", "agreement_vs_snr", "scenario_timeline"] as const;
export type Kind = (typeof KINDS)[number];

const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

function sortedUnique(values: number[]): number[] {
  return [...new Set(values)].sort((a, b) => a - b);
}

function rhoVsGamma(table: Table): Series[] {
  requireColumns(table, ["gamma_deg", "snr_db", "rho"]);
  const snrs = sortedUnique(table.rows.map((r) => num(r, "snr_db")));
  return snrs.map((snr, i) => {
    const pts = table.rows
      .filter((r) => num(r, "snr_db") === snr)
      .map((r): [number, number] => [num(r, "gamma_deg"), num(r, "rho")])
      .sort((a, b) => a[0] - b[0]);
    return { label: `SNR ${snr} dB`, color: PALETTE[i % PALETTE.length], points: pts };
  });
}

function agreementVsSnr(table: Table): Series[] {
  requireColumns(table, ["snr_db", "key_len", "p_alice_bob", "p_eve_bob"]);
  const keyLens = sortedUnique(table.rows.map((r) => num(r, "key_len")));
  const series: Series[] = [];
  for (const k of keyLens) {
    const rows = table.rows
      .filter((r) => num(r, "key_len") === k)
      .sort((a, b) => num(a, "snr_db") - num(b, "snr_db"));
    // solid for the shortest key, dashed for longer ones; blue Alice, red Eve
    const dash = k === keyLens[0] ? undefined : "6,3";
    series.push({
      label: `Alice-Bob ${k} bits`,
      color: "#1f77b4",
      dash,
      points: rows.map((r): [number, number] => [num(r, "snr_db"), num(r, "p_alice_bob")]),
    });
    series.push({
      label: `Eve-Bob ${k} bits`,
      color: "#d62728",
      dash,
      points: rows.map((r): [number, number] => [num(r, "snr_db"), num(r, "p_eve_bob")]),
    });
  }
  return series;
}

function scenarioTimeline(table: Table): Series[] {
  requireColumns(table, ["timestamp", "source_id", "detector", "severity"]);
  const detectors = [...new Set(table.rows.map((r) => r.detector))].sort();
  return detectors.map((det, i) => {
    const pts = table.rows
      .filter((r) => r.detector === det)
      .map((r): [number, number] => [num(r, "timestamp"), num(r, "severity")])
      .sort((a, b) => a[0] - b[0]);
    return { label: det, color: PALETTE[i % PALETTE.length], points: pts };
  });
}

const LAYOUTS: Record<Kind, { build: (t: Table) => Series[]; title: string; x: string; y: string }> = {
  rho_vs_gamma: {
    build: rhoVsGamma,
    title: "Expected complexity ratio vs PLA threshold",
    x: "gamma [deg]",
    y: "rho",
  },
  agreement_vs_snr: {
    build: agreementVsSnr,
    title: "Key agreement probability vs SNR",
    x: "SNR [dB]",
    y: "Agreement probability",
  },
  scenario_timeline: {
    build: scenarioTimeline,
    title: "Anomaly flags over time",
    x: "time [s]",
    y: "severity",
  },
};

export function renderCsv(text: string, kind: Kind): string {
  const layout = LAYOUTS[kind];
  if (!layout) {
    throw new SchemaError(`unknown kind; expected one of ${KINDS.join(", ")}`);
  }
  const table = parseCsv(text);
  if (table.rows.length === 0) {
    throw new SchemaError("input CSV has a header but no data rows");
  }
  const series = layout.build(table);
  return renderPlot({ title: layout.title, xLabel: layout.x, yLabel: layout.y, series });
}

export function main(argv: string[]): number {
  let values: { in?: string; out?: string; kind?: string };
  try {
    ({ values } = parseArgs({
      args: argv,
      options: {
        in: { type: "string" },
        out: { type: "string" },
        kind: { type: "string" },
      },
    }));
  } catch (e) {
    console.error(`figgen: ${(e as Error).message}`);
    return 2;
  }
  if (!values.in || !values.out || !values.kind || !KINDS.includes(values.kind as Kind)) {
    console.error(`usage: figgen --in data.csv --out figure.svg --kind {${KINDS.join("|")}}`);
    return 2;
  }
  let text: string;
  try {
    text = readFileSync(values.in, "utf8");
  } catch (e) {
    console.error(`figgen: cannot read ${values.in}: ${(e as Error).message}`);
    return 1;
  }
  let svg: string;
  try {
    svg = renderCsv(text, values.kind as Kind);
  } catch (e) {
    console.error(`figgen: ${(e as Error).message}`);
    return 1;
  }
  writeFileSync(values.out, svg);
  return 0;
}

if (process.argv[1] && process.argv[1].endsWith("figgen.js")) {
  process.exit(main(process.argv.slice(2)));
}
