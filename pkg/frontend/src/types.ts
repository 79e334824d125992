/** Wire types for the advisor service (shapes mirror the JSON payloads). */

export interface ApiTestRow {
  name: string;
  cost: number;
  discomfort: number;
  columns: string[];
}

export interface ApiTestTable {
  tests: ApiTestRow[];
}

export interface ApiOptionResult {
  fa: number;
  fa_rate: number;
  population: number;
  threshold: number;
  accuracy: number;
  sensitivity: number | null;
  converged: boolean;
}

export interface ApiOption {
  option_id: string;
  kept_tests: string[];
  removed_tests: string[];
  total_cost: number;
  total_discomfort: number;
  removed_discomfort: number;
  result: ApiOptionResult;
}

export interface ApiSelectResult {
  run_id: string;
  query: { mode: string; budget: number; protocol: string };
  options: ApiOption[];
}

export type JobStatus = "queued" | "running" | "done" | "failed";

export interface ApiJob {
  job_id: string;
  status: JobStatus;
  result?: ApiSelectResult;
  error?: string;
}

export interface ApiPrediction {
  run_id: string;
  p_abnormal: number;
  z_normal: number;
  threshold: number;
  decision: "normal" | "abnormal";
}

/** One editable row of the attribute table, plus UI-only state. */
export interface TestRow {
  name: string;
  cost: number;
  discomfort: number;
  columns: string[];
  /** When locked, the row's values cannot be edited until unlocked. */
  locked: boolean;
}

export type BudgetMode = "cost" | "discomfort";
