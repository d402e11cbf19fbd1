import type {
  JobStatus,
  KernelSignature,
  ReportEntry,
  SeriesResponse,
  ShapesResponse,
  ValidateResponse,
} from "./types.js";

/** Thin typed client over the service endpoints; every number shown in the
 * UI comes through here, nothing is recomputed client-side. */
export class ApiClient {
  constructor(private base: string = "") {}

  private async get<T>(path: string): Promise<T> {
    const res = await fetch(this.base + path);
    if (!res.ok) {
      throw new Error(`GET ${path}: ${res.status} ${await res.text()}`);
    }
    return res.json() as Promise<T>;
  }

  private async post<T>(path: string, body: unknown): Promise<T> {
    const res = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!res.ok) {
      throw new Error(`POST ${path}: ${res.status} ${await res.text()}`);
    }
    return res.json() as Promise<T>;
  }

  async kernels(): Promise<KernelSignature[]> {
    const body = await this.get<{ kernels: KernelSignature[] }>("/api/kernels");
    return body.kernels;
  }

  shapes(
    kernel: string,
    flags: Record<string, string>,
    dims: Record<string, number>,
  ): Promise<ShapesResponse> {
    return this.post("/api/shapes", { kernel, flags, dims });
  }

  validate(experiment: string): Promise<ValidateResponse> {
    return this.post("/api/validate", { experiment });
  }

  async submitJob(experiment: string, name: string): Promise<string> {
    const body = await this.post<{ id: string }>("/api/jobs", {
      experiment,
      name,
    });
    return body.id;
  }

  job(id: string): Promise<JobStatus> {
    return this.get(`/api/jobs/${id}`);
  }

  async reports(): Promise<ReportEntry[]> {
    const body = await this.get<{ reports: ReportEntry[] }>("/api/reports");
    return body.reports;
  }

  series(
    reportId: string,
    metric: string,
    stat: string,
    discardFirst: boolean,
    breakdown: boolean,
  ): Promise<SeriesResponse> {
    const params = new URLSearchParams({
      metric,
      stat,
      discard_first: String(discardFirst),
      breakdown: String(breakdown),
    });
    return this.get(`/api/reports/${reportId}/series?${params}`);
  }
}
