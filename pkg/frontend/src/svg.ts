/**
 * Deterministic SVG line plots.
 *
 * Data polylines live inside a group whose transform maps data space to
 * screen space, so the coordinates written into the file are the plotted
 * values themselves (exact, shortest round-trip formatting).  Axes, ticks
 * and the legend are drawn in screen space.
 */

export interface Series {
  label: string;
  color: string;
  dash?: string; // SVG stroke-dasharray, e.g. "6,3"
  points: [number, number][];
}

export interface PlotSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  width?: number;
  height?: number;
}

const MARGIN = { left: 62, right: 16, top: 34, bottom: 46 };

function extent(values: number[]): [number, number] {
  let lo = Math.min(...values);
  let hi = Math.max(...values);
  if (lo === hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  return [lo, hi];
}

function fmtTick(v: number): string {
  const r = Math.round(v * 1000) / 1000;
  return String(r);
}

export function renderPlot(spec: PlotSpec): string {
  if (spec.series.length === 0 || spec.series.every((s) => s.points.length === 0)) {
    throw new Error("nothing to plot: no data points");
  }
  const width = spec.width ?? 720;
  const height = spec.height ?? 460;
  const innerW = width - MARGIN.left - MARGIN.right;
  const innerH = height - MARGIN.top - MARGIN.bottom;

  const xs = spec.series.flatMap((s) => s.points.map((p) => p[0]));
  const ys = spec.series.flatMap((s) => s.points.map((p) => p[1]));
  const [x0, x1] = extent(xs);
  const [y0, y1] = extent(ys);
  const sx = innerW / (x1 - x0);
  const sy = innerH / (y1 - y0);

  const toScreenX = (x: number) => MARGIN.left + (x - x0) * sx;
  const toScreenY = (y: number) => MARGIN.top + innerH - (y - y0) * sy;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif" font-size="12">`,
  );
  parts.push(`<rect x="0" y="0" width="${width}" height="${height}" fill="white"/>`);
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" fill="none" stroke="black"/>`,
  );
  parts.push(`<text x="${width / 2}" y="18" text-anchor="middle" font-size="14">${spec.title}</text>`);
  parts.push(
    `<text x="${MARGIN.left + innerW / 2}" y="${height - 10}" text-anchor="middle">${spec.xLabel}</text>`,
  );
  parts.push(
    `<text x="16" y="${MARGIN.top + innerH / 2}" text-anchor="middle" transform="rotate(-90 16 ${
      MARGIN.top + innerH / 2
    })">${spec.yLabel}</text>`,
  );

  // ticks: five per axis, linearly spaced over the data extent
  for (let i = 0; i <= 4; i++) {
    const xv = x0 + ((x1 - x0) * i) / 4;
    const yv = y0 + ((y1 - y0) * i) / 4;
    const px = toScreenX(xv);
    const py = toScreenY(yv);
    parts.push(`<line x1="${px}" y1="${MARGIN.top + innerH}" x2="${px}" y2="${MARGIN.top + innerH + 5}" stroke="black"/>`);
    parts.push(`<text x="${px}" y="${MARGIN.top + innerH + 18}" text-anchor="middle">${fmtTick(xv)}</text>`);
    parts.push(`<line x1="${MARGIN.left - 5}" y1="${py}" x2="${MARGIN.left}" y2="${py}" stroke="black"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${py + 4}" text-anchor="end">${fmtTick(yv)}</text>`);
  }

  // data-space group: polyline coordinates are the raw data values
  const transform = `translate(${MARGIN.left} ${MARGIN.top + innerH}) scale(${sx} ${-sy}) translate(${-x0} ${-y0})`;
  parts.push(`<g class="data" transform="${transform}" fill="none">`);
  for (const s of spec.series) {
    const pts = s.points.map(([x, y]) => `${x},${y}`).join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline data-label="${s.label}" points="${pts}" stroke="${s.color}" stroke-width="1.6"${dash} vector-effect="non-scaling-stroke"/>`,
    );
  }
  parts.push("</g>");

  // legend, screen space, fixed order
  spec.series.forEach((s, i) => {
    const ly = MARGIN.top + 14 + i * 16;
    const lx = MARGIN.left + 12;
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" stroke="${s.color}" stroke-width="1.6"${dash}/>`);
    parts.push(`<text x="${lx + 32}" y="${ly}">${s.label}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
