import type { ArgSpec, KernelSignature } from "./types.js";

/** One call under construction: a kernel plus the raw token per argument. */
export interface CallDraft {
  kernel: string;
  values: Record<string, string>;
  /** ld fields stay auto-derived until the user overrides them. */
  ldOverridden: Record<string, boolean>;
}

export interface RangeDraft {
  variable: string;
  start: number;
  step: number;
  stop: number;
}

export interface ExperimentDraft {
  calls: CallDraft[];
  nthreads: string;
  range: RangeDraft | null;
  nreps: number;
  sumrange: RangeDraft | null;
  parrange: RangeDraft | null;
  params: Record<string, number>;
  varyLines: string[];
  seed: number;
}

export function emptyDraft(): ExperimentDraft {
  return {
    calls: [],
    nthreads: "1",
    range: null,
    nreps: 10,
    sumrange: null,
    parrange: null,
    params: {},
    varyLines: [],
    seed: 0,
  };
}

export function newCall(sig: KernelSignature): CallDraft {
  const values: Record<string, string> = {};
  const ldOverridden: Record<string, boolean> = {};
  for (const arg of sig.args) {
    values[arg.name] = defaultToken(arg);
    if (arg.kind === "ld") {
      ldOverridden[arg.name] = false;
    }
  }
  return { kernel: sig.name, values, ldOverridden };
}

function defaultToken(arg: ArgSpec): string {
  switch (arg.kind) {
    case "flag":
      return arg.allowed?.[0] ?? "";
    case "dim":
    case "ld":
      return "1";
    case "scalar":
      return "1";
    case "data":
      return arg.name;
    case "path":
      return "data.bin";
  }
}

function formatRange(label: string, r: RangeDraft): string {
  return `${label}: ${r.variable} ${r.start}:${r.step}:${r.stop}`;
}

/** Render the draft as experiment file text, the single wire format shared
 * with the CLI and the service validator. */
export function serializeDraft(draft: ExperimentDraft): string {
  const lines = ["#KERNBENCH EXPERIMENT v1"];
  lines.push("backend: local");
  lines.push("machine: default");
  lines.push(`nthreads: ${draft.nthreads}`);
  if (draft.range) {
    lines.push(formatRange("range", draft.range));
  }
  lines.push(`nreps: ${draft.nreps}`);
  if (draft.sumrange) {
    lines.push(formatRange("sumrange", draft.sumrange));
  }
  if (draft.parrange) {
    lines.push(formatRange("parrange", draft.parrange));
  }
  for (const name of Object.keys(draft.params).sort()) {
    lines.push(`param: ${name} ${draft.params[name]}`);
  }
  lines.push(`seed: ${draft.seed}`);
  for (const call of draft.calls) {
    const sig = callSignature(call);
    const tokens = sig.map((name) => call.values[name] ?? "");
    lines.push(`call: ${call.kernel} ${tokens.join(" ")}`.trimEnd());
  }
  for (const vary of draft.varyLines) {
    lines.push(`vary: ${vary}`);
  }
  return lines.join("\n") + "\n";
}

/** Argument order is recorded per call so serialization does not need the
 * signature catalog again. */
const argOrders = new Map<string, string[]>();

export function registerSignature(sig: KernelSignature): void {
  argOrders.set(sig.name, sig.args.map((a) => a.name));
}

function callSignature(call: CallDraft): string[] {
  const order = argOrders.get(call.kernel);
  if (!order) {
    throw new Error(`unknown kernel ${call.kernel} in draft`);
  }
  return order;
}
