/**
 * Submit an experiment and poll until the job reaches a terminal state.
 * Resolves with the stored report id so the caller can open the viewer;
 * rejects with the server's diagnostic when the run fails.
 */
export async function runAndTrack(api, experiment, name, callbacks = {}, intervalMs = 500) {
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
function sleep(ms) {
    return new Promise((resolve) => setTimeout(resolve, ms));
}
