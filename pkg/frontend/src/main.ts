import { ApiClient } from "./api.js";
import { flagChoices, overrideLd, refreshCallEditor } from "./callEditor.js";
import { renderChartSvg } from "./chart.js";
import {
  CallDraft,
  ExperimentDraft,
  emptyDraft,
  newCall,
  registerSignature,
  serializeDraft,
} from "./draft.js";
import { runAndTrack } from "./jobs.js";
import { METRICS, STATISTICS, ViewSelection, buildChart } from "./viewer.js";
import type { KernelSignature } from "./types.js";

const api = new ApiClient();
const draft: ExperimentDraft = emptyDraft();
let catalog: KernelSignature[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function sigOf(name: string): KernelSignature {
  const sig = catalog.find((s) => s.name === name);
  if (!sig) throw new Error(`unknown kernel ${name}`);
  return sig;
}

async function renderCall(call: CallDraft, container: HTMLElement) {
  const sig = sigOf(call.kernel);
  const state = await refreshCallEditor(api, sig, call);
  container.innerHTML = "";
  const row = document.createElement("div");
  row.className = "call-row";
  for (const arg of sig.args) {
    const wrap = document.createElement("label");
    wrap.textContent = arg.name;
    let input: HTMLElement;
    if (arg.kind === "flag") {
      const select = document.createElement("select");
      for (const ch of flagChoices(sig, arg.name)) {
        const opt = document.createElement("option");
        opt.value = ch;
        opt.textContent = ch;
        select.appendChild(opt);
      }
      select.value = call.values[arg.name];
      select.onchange = () => {
        call.values[arg.name] = select.value;
        void renderCall(call, container);
      };
      input = select;
    } else {
      const field = document.createElement("input");
      field.value = call.values[arg.name];
      field.onchange = () => {
        if (arg.kind === "ld") {
          overrideLd(call, arg.name, field.value);
        } else {
          call.values[arg.name] = field.value;
        }
        void renderCall(call, container);
      };
      input = field;
    }
    wrap.appendChild(input);
    row.appendChild(wrap);
  }
  container.appendChild(row);

  const viz = document.createElement("div");
  viz.className = "operand-viz";
  for (const [name, box] of Object.entries(state.boxes)) {
    const shape = state.shapes[name];
    const boxEl = document.createElement("div");
    boxEl.className = "operand-box";
    boxEl.style.width = `${box.width}px`;
    boxEl.style.height = `${box.height}px`;
    boxEl.title = `${name}: ${shape.rows} x ${shape.cols}, min ld ${shape.min_ld}`;
    boxEl.textContent = name;
    viz.appendChild(boxEl);
  }
  container.appendChild(viz);

  const diag = document.createElement("div");
  diag.className = "diagnostics";
  diag.textContent = state.diagnostics.join("; ");
  container.appendChild(diag);
}

async function validateDraft(): Promise<boolean> {
  const res = await api.validate(serializeDraft(draft));
  const out = el<HTMLElement>("validation");
  out.textContent = res.valid ? "valid" : res.diagnostics.join("\n");
  out.className = res.valid ? "ok" : "error";
  el<HTMLButtonElement>("run").disabled = !res.valid;
  return res.valid;
}

async function runDraft() {
  const status = el<HTMLElement>("job-status");
  try {
    const reportId = await runAndTrack(
      api,
      serializeDraft(draft),
      el<HTMLInputElement>("job-name").value || "experiment",
      { onState: (s) => (status.textContent = s.state) },
    );
    status.textContent = "done";
    await refreshReports();
    el<HTMLSelectElement>("report-select").value = reportId;
    await renderView();
  } catch (err) {
    status.textContent = `failed: ${(err as Error).message}`;
  }
}

async function refreshReports() {
  const select = el<HTMLSelectElement>("report-select");
  select.innerHTML = "";
  for (const entry of await api.reports()) {
    const opt = document.createElement("option");
    opt.value = entry.id;
    opt.textContent = `${entry.name} (${entry.id})`;
    select.appendChild(opt);
  }
}

async function renderView() {
  const select = el<HTMLSelectElement>("report-select");
  const ids = Array.from(select.selectedOptions).map((o) => o.value);
  if (ids.length === 0) return;
  const selection: ViewSelection = {
    reportIds: ids,
    metric: el<HTMLSelectElement>("metric").value,
    statistic: el<HTMLSelectElement>("stat").value,
    discardFirst: el<HTMLInputElement>("discard-first").checked,
    breakdown: el<HTMLInputElement>("breakdown").checked,
  };
  try {
    const model = await buildChart(api, selection);
    el<HTMLElement>("chart").innerHTML = renderChartSvg(model);
  } catch (err) {
    el<HTMLElement>("chart").textContent = (err as Error).message;
  }
}

async function init() {
  catalog = await api.kernels();
  catalog.forEach(registerSignature);

  const kernelSelect = el<HTMLSelectElement>("kernel-select");
  for (const sig of catalog) {
    const opt = document.createElement("option");
    opt.value = sig.name;
    opt.textContent = `${sig.name} - ${sig.description}`;
    kernelSelect.appendChild(opt);
  }
  el<HTMLButtonElement>("add-call").onclick = () => {
    const call = newCall(sigOf(kernelSelect.value));
    draft.calls.push(call);
    const container = document.createElement("div");
    container.className = "call-editor";
    el<HTMLElement>("calls").appendChild(container);
    void renderCall(call, container);
  };
  el<HTMLInputElement>("nreps").onchange = (e) => {
    draft.nreps = Number((e.target as HTMLInputElement).value);
  };
  el<HTMLInputElement>("seed").onchange = (e) => {
    draft.seed = Number((e.target as HTMLInputElement).value);
  };
  el<HTMLButtonElement>("validate").onclick = () => void validateDraft();
  el<HTMLButtonElement>("run").onclick = () => void runDraft();

  for (const m of METRICS) {
    const opt = document.createElement("option");
    opt.value = m;
    opt.textContent = m;
    el<HTMLSelectElement>("metric").appendChild(opt);
  }
  for (const s of STATISTICS) {
    const opt = document.createElement("option");
    opt.value = s;
    opt.textContent = s;
    el<HTMLSelectElement>("stat").appendChild(opt);
  }
  for (const id of ["report-select", "metric", "stat", "discard-first", "breakdown"]) {
    el<HTMLElement>(id).onchange = () => void renderView();
  }
  await refreshReports();
}

void init();
