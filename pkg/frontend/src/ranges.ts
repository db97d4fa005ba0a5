// Client-side validation of the dual time-range selection: the highlight
// (event) range must sit inside the total analysis range. Enforced before
// any session request leaves the browser.

export interface TimeRange {
  start: number;
  end: number;
}

export function validateRanges(total: TimeRange, highlight: TimeRange | null): string | null {
  if (!Number.isFinite(total.start) || !Number.isFinite(total.end)) {
    return "total range must be two numbers";
  }
  if (total.start >= total.end) {
    return "total range must have start < end";
  }
  if (highlight === null) return null;
  if (!Number.isFinite(highlight.start) || !Number.isFinite(highlight.end)) {
    return "highlight range must be two numbers";
  }
  if (highlight.start > highlight.end) {
    return "highlight range must have start <= end";
  }
  if (highlight.start < total.start || highlight.end > total.end) {
    return "highlight range must lie inside the total range";
  }
  return null;
}

// Records pasted on the dataset screen stay available to the client, so
// the target picker can render a preview series without a dedicated API.
export function seriesFromJsonl(jsonl: string, metric: string, maxPoints = 2000): number[] {
  const byTs = new Map<number, { sum: number; n: number }>();
  for (const line of jsonl.split("\n")) {
    const t = line.trim();
    if (!t) continue;
    let row: { ts: number; metric: string; value: number };
    try {
      row = JSON.parse(t);
    } catch {
      continue;
    }
    if (row.metric !== metric || typeof row.value !== "number") continue;
    const e = byTs.get(row.ts) ?? { sum: 0, n: 0 };
    e.sum += row.value;
    e.n += 1;
    byTs.set(row.ts, e);
  }
  const ts = [...byTs.keys()].sort((a, b) => a - b);
  const series = ts.map((t) => {
    const e = byTs.get(t)!;
    return e.sum / e.n;
  });
  return downsample(series, maxPoints);
}

export function metricNames(jsonl: string): string[] {
  const names = new Set<string>();
  for (const line of jsonl.split("\n")) {
    const t = line.trim();
    if (!t) continue;
    try {
      const row = JSON.parse(t);
      if (typeof row.metric === "string") names.add(row.metric);
    } catch {
      continue;
    }
  }
  return [...names].sort();
}

// Uniform stride downsampling; plots never carry more than maxPoints per
// trace regardless of the analysis length.
export function downsample(series: number[], maxPoints = 2000): number[] {
  if (series.length <= maxPoints) return series;
  const stride = series.length / maxPoints;
  const out = new Array<number>(maxPoints);
  for (let i = 0; i < maxPoints; i++) {
    out[i] = series[Math.min(series.length - 1, Math.floor(i * stride))];
  }
  return out;
}
