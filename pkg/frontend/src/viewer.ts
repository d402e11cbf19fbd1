import type { ApiClient } from "./api.js";
import type { SeriesPoint, SeriesResponse } from "./types.js";

export interface ViewSelection {
  reportIds: string[];
  metric: string;
  statistic: string;
  discardFirst: boolean;
  breakdown: boolean;
}

export interface ChartSeries {
  label: string;
  points: SeriesPoint[];
}

export interface ChartModel {
  kind: "line" | "bar";
  xLabel: string;
  yLabel: string;
  series: ChartSeries[];
}

export const METRICS = [
  "cycles",
  "time",
  "gflops",
  "flops-per-cycle",
  "efficiency",
] as const;

export const STATISTICS = ["min", "max", "mean", "median", "std"] as const;

/**
 * Fetch the selected series and assemble the chart model.  Values are used
 * verbatim as returned by the API; ranged reports render as lines, reports
 * without a range as bars.  Mixing ranged and unranged reports is refused.
 */
export async function buildChart(
  api: ApiClient,
  selection: ViewSelection,
  labels: Record<string, string> = {},
): Promise<ChartModel> {
  const responses: [string, SeriesResponse][] = [];
  for (const id of selection.reportIds) {
    responses.push([
      id,
      await api.series(
        id,
        selection.metric,
        selection.statistic,
        selection.discardFirst,
        selection.breakdown,
      ),
    ]);
  }
  if (responses.length === 0) {
    throw new Error("no reports selected");
  }
  const ranged = responses.map(([, r]) => r.range_var !== null);
  if (ranged.some((r) => r !== ranged[0])) {
    throw new Error("selected reports mix ranged and unranged experiments");
  }
  const series: ChartSeries[] = [];
  for (const [id, resp] of responses) {
    const base = labels[id] ?? id;
    for (const [key, points] of Object.entries(resp.series)) {
      series.push({
        label: key === "total" ? base : `${base} ${key}`,
        points,
      });
    }
  }
  return {
    kind: ranged[0] ? "line" : "bar",
    xLabel: responses[0][1].range_var ?? "",
    yLabel: `${selection.metric} (${selection.statistic})`,
    series,
  };
}

/** Rows for the stats table next to the chart: label, x, y as delivered. */
export function tableRows(
  model: ChartModel,
): { series: string; x: number | null; y: number | null }[] {
  const rows = [];
  for (const s of model.series) {
    for (const p of s.points) {
      rows.push({ series: s.label, x: p.x, y: p.y });
    }
  }
  return rows;
}
