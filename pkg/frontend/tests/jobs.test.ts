import { afterEach, describe, expect, it, vi } from "vitest";
import { ApiClient } from "../src/api.js";
import { runAndTrack } from "../src/jobs.js";
import type { JobState } from "../src/types.js";
import { jsonBody, stubFetch } from "./helpers.js";

afterEach(() => vi.unstubAllGlobals());

function jobRoutes(states: JobState[], reportId: string | null, error: string | null) {
  let poll = 0;
  let submitted: Record<string, unknown> | null = null;
  const routes = [
    (url: string, init?: RequestInit) => {
      if (url.endsWith("/api/jobs") && init?.method === "POST") {
        submitted = jsonBody(init);
        return { status: 202, body: { id: "job7" } };
      }
      return null;
    },
    (url: string) => {
      if (url.endsWith("/api/jobs/job7")) {
        const state = states[Math.min(poll++, states.length - 1)];
        return {
          body: {
            id: "job7",
            name: "demo",
            state,
            error: state === "failed" ? error : null,
            report_id: state === "done" ? reportId : null,
          },
        };
      }
      return null;
    },
  ];
  return { routes, submittedBody: () => submitted };
}

describe("run and track", () => {
  it("follows queued -> running -> done and resolves the report id", async () => {
    const { routes, submittedBody } = jobRoutes(
      ["queued", "running", "running", "done"],
      "report_3",
      null,
    );
    stubFetch(...routes);
    const seen: JobState[] = [];
    const reportId = await runAndTrack(
      new ApiClient(),
      "#KERNBENCH EXPERIMENT v1\n",
      "demo",
      { onState: (s) => seen.push(s.state) },
      1,
    );
    expect(reportId).toBe("report_3");
    expect(seen).toEqual(["queued", "running", "running", "done"]);
    expect(submittedBody()).toEqual({
      experiment: "#KERNBENCH EXPERIMENT v1\n",
      name: "demo",
    });
  });

  it("rejects with the server diagnostic when the job fails", async () => {
    const { routes } = jobRoutes(["queued", "failed"], null, "kernel blew up");
    stubFetch(...routes);
    await expect(
      runAndTrack(new ApiClient(), "#KERNBENCH EXPERIMENT v1\n", "demo", {}, 1),
    ).rejects.toThrow("kernel blew up");
  });
});
