/** Wire types mirroring the HTTP API responses. */

export type ArgKind = "flag" | "dim" | "scalar" | "ld" | "data" | "path";

export interface ShapeRuleSwitch {
  flag: string;
  cases: Record<string, string>;
}

export type ShapeRule = string | ShapeRuleSwitch;

export interface ArgSpec {
  name: string;
  kind: ArgKind;
  allowed?: string[];       // flag
  of?: string;              // ld: name of the data operand it serves
  rows?: ShapeRule;         // data
  cols?: ShapeRule;
  ld?: string | null;
  structure?: ShapeRule;
}

export interface KernelSignature {
  name: string;
  dtype: "double" | "single";
  description: string;
  args: ArgSpec[];
}

export interface OperandShape {
  rows: number;
  cols: number;
  min_ld: number;
}

export type ShapesResponse = { operands: Record<string, OperandShape> };

export interface ValidateResponse {
  valid: boolean;
  diagnostics: string[];
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobStatus {
  id: string;
  name: string;
  state: JobState;
  error: string | null;
  report_id: string | null;
}

export interface ReportEntry {
  id: string;
  name: string;
}

export interface SeriesPoint {
  x: number | null;
  y: number | null;
}

export interface SeriesResponse {
  metric: string;
  statistic: string;
  range_var: string | null;
  series: Record<string, SeriesPoint[]>;
}
