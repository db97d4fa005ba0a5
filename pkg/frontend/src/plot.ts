// Minimal dependency-free SVG line plots: one or two traces over a shared
// x axis, optional highlight band for the event range.

import { downsample } from "./ranges.js";

const W = 640;
const H = 160;
const PAD = 4;

function pathOf(series: number[], lo: number, span: number): string {
  const n = series.length;
  if (n === 0) return "";
  const step = (W - 2 * PAD) / Math.max(1, n - 1);
  const parts: string[] = [];
  for (let i = 0; i < n; i++) {
    const x = PAD + i * step;
    const y = H - PAD - ((series[i] - lo) / span) * (H - 2 * PAD);
    parts.push(`${i === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`);
  }
  return parts.join(" ");
}

export interface PlotOptions {
  highlight?: [number, number] | null; // fraction of x span, 0..1 pair
}

export function renderSeriesPlot(
  doc: Document,
  traces: { name: string; values: number[] }[],
  options: PlotOptions = {},
): SVGSVGElement {
  const svg = doc.createElementNS("http://www.w3.org/2000/svg", "svg");
  svg.setAttribute("viewBox", `0 0 ${W} ${H}`);
  svg.setAttribute("class", "series-plot");
  const sampled = traces.map((t) => ({ name: t.name, values: downsample(t.values) }));
  const all = sampled.flatMap((t) => t.values);
  const lo = Math.min(...all, 0);
  const hi = Math.max(...all, 1e-9);
  const span = hi - lo || 1;
  if (options.highlight) {
    const [a, b] = options.highlight;
    const band = doc.createElementNS("http://www.w3.org/2000/svg", "rect");
    band.setAttribute("class", "highlight-band");
    band.setAttribute("x", String(PAD + a * (W - 2 * PAD)));
    band.setAttribute("width", String(Math.max(2, (b - a) * (W - 2 * PAD))));
    band.setAttribute("y", "0");
    band.setAttribute("height", String(H));
    svg.appendChild(band);
  }
  for (const trace of sampled) {
    const path = doc.createElementNS("http://www.w3.org/2000/svg", "path");
    path.setAttribute("class", `trace trace-${trace.name}`);
    path.setAttribute("fill", "none");
    path.setAttribute("d", pathOf(trace.values, lo, span));
    svg.appendChild(path);
  }
  return svg;
}
