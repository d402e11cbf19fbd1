import type { ApiClient } from "./api.js";
import type { CallDraft } from "./draft.js";
import type { KernelSignature, OperandShape } from "./types.js";

/** Rendered state of one call form: widgets per argument plus the derived
 * operand geometry fetched from the server. */
export interface CallEditorState {
  call: CallDraft;
  signature: KernelSignature;
  /** per data operand: rows/cols/min_ld as derived server-side */
  shapes: Record<string, OperandShape>;
  /** operand boxes scaled for display, keyed by operand name */
  boxes: Record<string, OperandBox>;
  diagnostics: string[];
}

export interface OperandBox {
  width: number;
  height: number;
}

/** Largest rendered box edge in pixels; tiny dims keep a visible minimum. */
const BOX_MAX = 120;
const BOX_MIN = 6;

export function flagChoices(sig: KernelSignature, name: string): string[] {
  const arg = sig.args.find((a) => a.name === name);
  return arg?.allowed ?? [];
}

function concreteDims(
  sig: KernelSignature,
  call: CallDraft,
): { flags: Record<string, string>; dims: Record<string, number> } | null {
  const flags: Record<string, string> = {};
  const dims: Record<string, number> = {};
  for (const arg of sig.args) {
    if (arg.kind === "flag") {
      flags[arg.name] = call.values[arg.name];
    } else if (arg.kind === "dim") {
      const v = Number(call.values[arg.name]);
      if (!Number.isInteger(v) || v < 0) {
        return null; // symbolic dims: shapes only resolve server-side later
      }
      dims[arg.name] = v;
    }
  }
  return { flags, dims };
}

function scaleBoxes(
  shapes: Record<string, OperandShape>,
): Record<string, OperandBox> {
  let largest = 1;
  for (const s of Object.values(shapes)) {
    largest = Math.max(largest, s.rows, s.cols);
  }
  const boxes: Record<string, OperandBox> = {};
  for (const [name, s] of Object.entries(shapes)) {
    boxes[name] = {
      width: Math.max(BOX_MIN, Math.round((s.cols / largest) * BOX_MAX)),
      height: Math.max(BOX_MIN, Math.round((s.rows / largest) * BOX_MAX)),
    };
  }
  return boxes;
}

/**
 * Recompute the editor state after an edit: fetch the derived shapes for
 * the current flag/dim values, auto-fill every non-overridden ld with the
 * server's minimal ld, and flag ld values below that minimum.
 */
export async function refreshCallEditor(
  api: ApiClient,
  sig: KernelSignature,
  call: CallDraft,
): Promise<CallEditorState> {
  const concrete = concreteDims(sig, call);
  if (!concrete) {
    return { call, signature: sig, shapes: {}, boxes: {}, diagnostics: [] };
  }
  const { operands } = await api.shapes(sig.name, concrete.flags, concrete.dims);

  const diagnostics: string[] = [];
  for (const arg of sig.args) {
    if (arg.kind !== "ld" || !arg.of) {
      continue;
    }
    const shape = operands[arg.of];
    if (!shape) {
      continue;
    }
    if (!call.ldOverridden[arg.name]) {
      call.values[arg.name] = String(shape.min_ld);
    } else {
      const v = Number(call.values[arg.name]);
      if (Number.isInteger(v) && v < shape.min_ld) {
        diagnostics.push(
          `${arg.name} = ${v} is below the row count ${shape.rows} of ${arg.of}`,
        );
      }
    }
  }
  return {
    call,
    signature: sig,
    shapes: operands,
    boxes: scaleBoxes(operands),
    diagnostics,
  };
}

/** Record a user edit of an ld field so auto-fill stops touching it. */
export function overrideLd(call: CallDraft, name: string, value: string): void {
  call.ldOverridden[name] = true;
  call.values[name] = value;
}
