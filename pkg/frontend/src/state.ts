/** Session state and pure transitions.
 *
 * The UI computes no statistics: options, FA counts and thresholds are
 * carried verbatim from the last server response. Edits to the test
 * table invalidate any displayed options (they were computed against
 * the old attributes), and a submission epoch lets the app drop results
 * of superseded polls.
 */

import type {
  ApiOption,
  ApiPrediction,
  ApiTestRow,
  BudgetMode,
  TestRow,
} from "./types.js";

export interface AdvisorState {
  tests: TestRow[];
  /** Table edited since the last successful PUT. */
  dirty: boolean;
  mode: BudgetMode;
  budget: number;
  /** Monotone counter; poll results from older submissions are dropped. */
  submission: number;
  polling: boolean;
  options: ApiOption[] | null;
  runId: string | null;
  /** Set when displayed results were cleared because attributes changed. */
  invalidatedNotice: boolean;
  compareSelection: string[];
  error: string | null;
  prediction: ApiPrediction | null;
  predictionError: string | null;
}

export const MAX_COMPARE = 4;

export function initialState(): AdvisorState {
  return {
    tests: [],
    dirty: false,
    mode: "cost",
    budget: 2000,
    submission: 0,
    polling: false,
    options: null,
    runId: null,
    invalidatedNotice: false,
    compareSelection: [],
    error: null,
    prediction: null,
    predictionError: null,
  };
}

export function predictionReceived(
  state: AdvisorState,
  prediction: ApiPrediction,
): AdvisorState {
  return { ...state, prediction, predictionError: null };
}

export function predictionFailed(state: AdvisorState, message: string): AdvisorState {
  return { ...state, prediction: null, predictionError: message };
}

export function withTests(state: AdvisorState, rows: ApiTestRow[]): AdvisorState {
  const locked = new Map(state.tests.map((t) => [t.name, t.locked]));
  return {
    ...state,
    tests: rows.map((r) => ({ ...r, locked: locked.get(r.name) ?? false })),
    dirty: false,
    error: null,
  };
}

function validValue(v: number): boolean {
  return Number.isFinite(v) && v >= 0;
}

export function editTest(
  state: AdvisorState,
  name: string,
  patch: { cost?: number; discomfort?: number },
): AdvisorState {
  const row = state.tests.find((t) => t.name === name);
  if (!row) return { ...state, error: `unknown test ${name}` };
  if (row.locked) return { ...state, error: `${name} is locked; unlock it to edit` };
  const values = [patch.cost, patch.discomfort].filter((v) => v !== undefined);
  if (!values.every((v) => validValue(v as number))) {
    return { ...state, error: `${name}: values must be non-negative numbers` };
  }
  return {
    ...state,
    error: null,
    dirty: true,
    tests: state.tests.map((t) => (t.name === name ? { ...t, ...patch } : t)),
  };
}

export function toggleLock(state: AdvisorState, name: string): AdvisorState {
  return {
    ...state,
    tests: state.tests.map((t) =>
      t.name === name ? { ...t, locked: !t.locked } : t,
    ),
  };
}

/** After a successful PUT: table is clean and stale options are cleared. */
export function editsApplied(state: AdvisorState, rows: ApiTestRow[]): AdvisorState {
  const next = withTests(state, rows);
  const hadOptions = state.options !== null;
  return {
    ...next,
    options: null,
    runId: null,
    compareSelection: [],
    invalidatedNotice: hadOptions,
  };
}

export function setMode(state: AdvisorState, mode: BudgetMode): AdvisorState {
  return { ...state, mode };
}

export function setBudget(state: AdvisorState, budget: number): AdvisorState {
  if (!Number.isFinite(budget) || budget < 0) {
    return { ...state, error: "budget must be a non-negative number" };
  }
  return { ...state, budget, error: null };
}

/** A new submission supersedes any in-flight poll. */
export function beginSubmission(state: AdvisorState): AdvisorState {
  return {
    ...state,
    submission: state.submission + 1,
    polling: true,
    error: null,
    invalidatedNotice: false,
  };
}

export function submissionSucceeded(
  state: AdvisorState,
  submission: number,
  options: ApiOption[],
  runId: string,
): AdvisorState {
  if (submission !== state.submission) return state; // superseded
  return {
    ...state,
    polling: false,
    options,
    runId,
    compareSelection: [],
    invalidatedNotice: false,
  };
}

export function submissionFailed(
  state: AdvisorState,
  submission: number,
  message: string,
): AdvisorState {
  if (submission !== state.submission) return state;
  return { ...state, polling: false, error: message };
}

export function toggleCompare(state: AdvisorState, optionId: string): AdvisorState {
  if (!state.options?.some((o) => o.option_id === optionId)) return state;
  const selected = state.compareSelection.includes(optionId);
  if (selected) {
    return {
      ...state,
      compareSelection: state.compareSelection.filter((id) => id !== optionId),
    };
  }
  if (state.compareSelection.length >= MAX_COMPARE) return state;
  return { ...state, compareSelection: [...state.compareSelection, optionId] };
}

/** Minimum-FA option id of the current response (display only). */
export function bestOptionId(options: ApiOption[]): string | null {
  if (options.length === 0) return null;
  let best = options[0]!;
  for (const o of options) {
    if (o.result.fa < best.result.fa) best = o;
  }
  return best.option_id;
}

export function tableForUpload(state: AdvisorState): { tests: ApiTestRow[] } {
  return {
    tests: state.tests.map(({ name, cost, discomfort, columns }) => ({
      name,
      cost,
      discomfort,
      columns,
    })),
  };
}
