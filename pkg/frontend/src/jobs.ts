import type { ApiClient } from "./api.js";
import type { JobStatus } from "./types.js";

export interface TrackCallbacks {
  onState?: (status: JobStatus) => void;
}

/**
 * Submit an experiment and poll until the job reaches a terminal state.
 * Resolves with the stored report id so the caller can open the viewer;
 * rejects with the server's diagnostic when the run fails.
 */
export async function runAndTrack(
  api: ApiClient,
  experiment: string,
  name: string,
  callbacks: TrackCallbacks = {},
  intervalMs = 500,
): Promise<string> {
  const id = await api.submitJob(experiment, name);
  for (;;) {
    const status = await api.job(id);
    callbacks.onState?.(status);
    if (status.state === "done") {
      if (!status.report_id) {
        throw new Error(`job ${id} finished without a report`);
      }
      return status.report_id;
    }
    if (status.state === "failed") {
      throw new Error(status.error ?? `job ${id} failed`);
    }
    await sleep(intervalMs);
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
