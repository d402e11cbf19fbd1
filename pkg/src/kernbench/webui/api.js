/** Thin typed client over the service endpoints; every number shown in the
 * UI comes through here, nothing is recomputed client-side. */
export class ApiClient {
    constructor(base = "") {
        this.base = base;
    }
    async get(path) {
        const res = await fetch(this.base + path);
        if (!res.ok) {
            throw new Error(`GET ${path}: ${res.status} ${await res.text()}`);
        }
        return res.json();
    }
    async post(path, body) {
        const res = await fetch(this.base + path, {
            method: "POST",
            headers: { "Content-Type": "application/json" },
            body: JSON.stringify(body),
        });
        if (!res.ok) {
            throw new Error(`POST ${path}: ${res.status} ${await res.text()}`);
        }
        return res.json();
    }
    async kernels() {
        const body = await this.get("/api/kernels");
        return body.kernels;
    }
    shapes(kernel, flags, dims) {
        return this.post("/api/shapes", { kernel, flags, dims });
    }
    validate(experiment) {
        return this.post("/api/validate", { experiment });
    }
    async submitJob(experiment, name) {
        const body = await this.post("/api/jobs", {
            experiment,
            name,
        });
        return body.id;
    }
    job(id) {
        return this.get(`/api/jobs/${id}`);
    }
    async reports() {
        const body = await this.get("/api/reports");
        return body.reports;
    }
    series(reportId, metric, stat, discardFirst, breakdown) {
        const params = new URLSearchParams({
            metric,
            stat,
            discard_first: String(discardFirst),
            breakdown: String(breakdown),
        });
        return this.get(`/api/reports/${reportId}/series?${params}`);
    }
}
