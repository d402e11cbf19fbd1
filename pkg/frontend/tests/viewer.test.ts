import { afterEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { renderChartSvg } from "../src/chart.js";
import { buildChart, tableRows } from "../src/viewer.js";
import type { SeriesResponse } from "../src/types.js";
import { stubFetch } from "./helpers.js";

afterEach(() => vi.unstubAllGlobals());

const RANGED: SeriesResponse = {
  metric: "gflops",
  statistic: "median",
  range_var: "n",
  series: {
    total: [
      { x: 50, y: 17.25 },
      { x: 100, y: 18.062500000000004 },
      { x: 150, y: null },
    ],
  },
};

const BREAKDOWN: SeriesResponse = {
  metric: "time",
  statistic: "min",
  range_var: null,
  series: {
    total: [{ x: null, y: 0.125 }],
    "call0:dgetrf": [{ x: null, y: 0.1 }],
    "call1:dtrsm": [{ x: null, y: 0.025 }],
  },
};

function seriesRoute(byReport: Record<string, SeriesResponse>) {
  return (url: string) => {
    const m = url.match(/\/api\/reports\/([^/]+)\/series\?(.*)$/);
    if (!m) return null;
    const resp = byReport[m[1]];
    if (!resp) return { status: 404, body: { detail: "unknown report" } };
    return { body: resp };
  };
}

describe("viewer", () => {
  it("shows ranged series values verbatim from the API", async () => {
    const mock = stubFetch(seriesRoute({ r1: RANGED }));
    const model = await buildChart(new ApiClient(), {
      reportIds: ["r1"],
      metric: "gflops",
      statistic: "median",
      discardFirst: true,
      breakdown: false,
    });
    expect(mock).toHaveBeenCalledWith(
      "/api/reports/r1/series?metric=gflops&stat=median&discard_first=true&breakdown=false",
    );
    expect(model.kind).toBe("line");
    expect(model.xLabel).toBe("n");
    expect(model.yLabel).toBe("gflops (median)");
    expect(model.series).toEqual([
      { label: "r1", points: RANGED.series.total },
    ]);
    // The table exposes the exact numbers the server sent, gaps included.
    expect(tableRows(model)).toEqual([
      { series: "r1", x: 50, y: 17.25 },
      { series: "r1", x: 100, y: 18.062500000000004 },
      { series: "r1", x: 150, y: null },
    ]);
  });

  it("renders unranged breakdown series as labelled bars", async () => {
    stubFetch(seriesRoute({ r2: BREAKDOWN }));
    const model = await buildChart(
      new ApiClient(),
      {
        reportIds: ["r2"],
        metric: "time",
        statistic: "min",
        discardFirst: true,
        breakdown: true,
      },
      { r2: "solve" },
    );
    expect(model.kind).toBe("bar");
    expect(model.series.map((s) => s.label)).toEqual([
      "solve",
      "solve call0:dgetrf",
      "solve call1:dtrsm",
    ]);
    const svg = renderChartSvg(model);
    expect(svg).toContain("<svg");
    expect(svg).toContain("solve call1:dtrsm");
    expect((svg.match(/<rect x=/g) ?? []).length).toBeGreaterThanOrEqual(3);
  });

  it("refuses to mix ranged and unranged reports", async () => {
    stubFetch(seriesRoute({ r1: RANGED, r2: BREAKDOWN }));
    await expect(
      buildChart(new ApiClient(), {
        reportIds: ["r1", "r2"],
        metric: "gflops",
        statistic: "median",
        discardFirst: true,
        breakdown: false,
      }),
    ).rejects.toThrow("mix ranged and unranged");
  });

  it("surfaces API errors with status and body", async () => {
    stubFetch(seriesRoute({}));
    await expect(
      buildChart(new ApiClient(), {
        reportIds: ["missing"],
        metric: "gflops",
        statistic: "median",
        discardFirst: true,
        breakdown: false,
      }),
    ).rejects.toThrow("404");
  });
});
