import { vi } from "vitest";
import type { KernelSignature } from "../src/types.js";

/** A trimmed dgemm signature matching the service catalog shape. */
export const DGEMM: KernelSignature = {
  name: "dgemm",
  dtype: "double",
  description: "general matrix-matrix multiply",
  args: [
    { name: "transA", kind: "flag", allowed: ["N", "T"] },
    { name: "transB", kind: "flag", allowed: ["N", "T"] },
    { name: "m", kind: "dim" },
    { name: "n", kind: "dim" },
    { name: "k", kind: "dim" },
    { name: "alpha", kind: "scalar" },
    {
      name: "A",
      kind: "data",
      rows: { flag: "transA", cases: { N: "m", T: "k" } },
      cols: { flag: "transA", cases: { N: "k", T: "m" } },
      ld: "ldA",
    },
    { name: "ldA", kind: "ld", of: "A" },
    {
      name: "B",
      kind: "data",
      rows: { flag: "transB", cases: { N: "k", T: "n" } },
      cols: { flag: "transB", cases: { N: "n", T: "k" } },
      ld: "ldB",
    },
    { name: "ldB", kind: "ld", of: "B" },
    { name: "beta", kind: "scalar" },
    { name: "C", kind: "data", rows: "m", cols: "n", ld: "ldC" },
    { name: "ldC", kind: "ld", of: "C" },
  ],
};

export type Route = (
  url: string,
  init?: RequestInit,
) => { status?: number; body: unknown } | null;

/** Install a fetch stub dispatching to the given routes in order. */
export function stubFetch(...routes: Route[]): ReturnType<typeof vi.fn> {
  const mock = vi.fn(async (url: string, init?: RequestInit) => {
    for (const route of routes) {
      const hit = route(url, init);
      if (hit) {
        return new Response(JSON.stringify(hit.body), {
          status: hit.status ?? 200,
          headers: { "Content-Type": "application/json" },
        });
      }
    }
    return new Response("not found", { status: 404 });
  });
  vi.stubGlobal("fetch", mock);
  return mock;
}

export function jsonBody(init?: RequestInit): Record<string, unknown> {
  return JSON.parse(String(init?.body ?? "{}"));
}
