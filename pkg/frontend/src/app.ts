/** DOM bootstrap: one state object, re-render on every transition.
 *
 * At most one selection poll is live; submitting again aborts the
 * previous poll and bumps the submission epoch so late results from the
 * old job are ignored even if they arrive.
 */

import { ApiClient } from "./api.js";
import { pollSelectJob, PollAborted } from "./poll.js";
import {
  AdvisorState,
  beginSubmission,
  editsApplied,
  editTest,
  initialState,
  predictionFailed,
  predictionReceived,
  setBudget,
  setMode,
  submissionFailed,
  submissionSucceeded,
  tableForUpload,
  toggleCompare,
  toggleLock,
  withTests,
} from "./state.js";
import { renderApp } from "./views.js";
import type { BudgetMode } from "./types.js";

const api = new ApiClient("");
let state: AdvisorState = initialState();
let pollAbort: AbortController | null = null;

function render(): void {
  const root = document.getElementById("app");
  if (root) root.innerHTML = renderApp(state);
}

function update(next: AdvisorState): void {
  state = next;
  render();
}

async function loadTests(): Promise<void> {
  try {
    const table = await api.getTests();
    update(withTests(state, table.tests));
  } catch (err) {
    update({ ...state, error: (err as Error).message });
  }
}

async function saveTests(): Promise<void> {
  try {
    const saved = await api.putTests(tableForUpload(state));
    update(editsApplied(state, saved.tests));
  } catch (err) {
    update({ ...state, error: (err as Error).message });
  }
}

async function submitQuery(): Promise<void> {
  pollAbort?.abort();
  pollAbort = new AbortController();
  const next = beginSubmission(state);
  const submission = next.submission;
  update(next);
  try {
    const { job_id } = await api.postSelect(state.mode, state.budget);
    const result = await pollSelectJob(api, job_id, {
      signal: pollAbort.signal,
    });
    update(submissionSucceeded(state, submission, result.options, result.run_id));
  } catch (err) {
    if (err instanceof PollAborted) return; // superseded by a newer query
    update(submissionFailed(state, submission, (err as Error).message));
  }
}

function onInput(event: Event): void {
  const target = event.target as HTMLInputElement;
  if (target.classList.contains("cost-input")) {
    update(editTest(state, target.dataset.test ?? "", { cost: Number(target.value) }));
  } else if (target.classList.contains("discomfort-input")) {
    update(editTest(state, target.dataset.test ?? "", { discomfort: Number(target.value) }));
  } else if (target.id === "budget-slider" || target.id === "budget-number") {
    update(setBudget(state, Number(target.value)));
  }
}

function onChange(event: Event): void {
  const target = event.target as HTMLInputElement;
  if (target.classList.contains("lock-input")) {
    update(toggleLock(state, target.dataset.test ?? ""));
  } else if (target.name === "mode") {
    update(setMode(state, target.value as BudgetMode));
  } else if (target.classList.contains("compare-input")) {
    update(toggleCompare(state, target.dataset.option ?? ""));
  }
}

async function submitPredict(): Promise<void> {
  const field = document.getElementById("predict-record") as HTMLTextAreaElement | null;
  if (!field) return;
  let record: Record<string, unknown>;
  try {
    record = JSON.parse(field.value);
  } catch {
    update(predictionFailed(state, "record is not valid JSON"));
    return;
  }
  try {
    update(predictionReceived(state, await api.postPredict(record)));
  } catch (err) {
    update(predictionFailed(state, (err as Error).message));
  }
}

function onClick(event: Event): void {
  const target = event.target as HTMLElement;
  if (target.id === "save-tests") void saveTests();
  if (target.id === "submit-query") void submitQuery();
  if (target.id === "submit-predict") void submitPredict();
}

export function start(): void {
  document.addEventListener("input", onInput);
  document.addEventListener("change", onChange);
  document.addEventListener("click", onClick);
  render();
  void loadTests();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  start();
}
