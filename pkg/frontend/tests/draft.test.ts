import { describe, expect, it } from "vitest";
import {
  emptyDraft,
  newCall,
  registerSignature,
  serializeDraft,
} from "../src/draft.js";
import { DGEMM } from "./helpers.js";

describe("experiment draft", () => {
  it("serializes calls in signature order with defaults filled in", () => {
    registerSignature(DGEMM);
    const draft = emptyDraft();
    const call = newCall(DGEMM);
    call.values.m = "100";
    call.values.n = "100";
    call.values.k = "100";
    call.values.ldA = "100";
    call.values.ldB = "100";
    call.values.ldC = "100";
    draft.calls.push(call);
    draft.range = { variable: "n", start: 50, step: 50, stop: 200 };
    draft.params = { nb: 32 };
    draft.seed = 42;

    expect(serializeDraft(draft)).toBe(
      [
        "#KERNBENCH EXPERIMENT v1",
        "backend: local",
        "machine: default",
        "nthreads: 1",
        "range: n 50:50:200",
        "nreps: 10",
        "param: nb 32",
        "seed: 42",
        "call: dgemm N N 100 100 100 1 A 100 B 100 1 C 100",
        "",
      ].join("\n"),
    );
  });

  it("emits vary lines and optional ranges only when present", () => {
    registerSignature(DGEMM);
    const draft = emptyDraft();
    draft.calls.push(newCall(DGEMM));
    draft.sumrange = { variable: "j", start: 0, step: 32, stop: 96 };
    draft.varyLines.push("C with j along 1 pad 0");
    const text = serializeDraft(draft);
    expect(text).toContain("sumrange: j 0:32:96");
    expect(text).toContain("vary: C with j along 1 pad 0");
    expect(text).not.toContain("range: n");
    expect(text).not.toContain("parrange:");
  });
});
