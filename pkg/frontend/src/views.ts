/** Pure HTML renderers. All numbers come straight off the state/payload;
 * the only derived display value is which row wears the best badge.
 */

import type { AdvisorState } from "./state.js";
import { bestOptionId } from "./state.js";
import type { ApiOption } from "./types.js";

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderTestTable(state: AdvisorState): string {
  const rows = state.tests
    .map(
      (t) => `
    <tr data-test="${esc(t.name)}">
      <td class="test-name">${esc(t.name)}</td>
      <td><input class="cost-input" data-test="${esc(t.name)}" type="number" min="0"
           value="${t.cost}" ${t.locked ? "disabled" : ""}></td>
      <td><input class="discomfort-input" data-test="${esc(t.name)}" type="number" min="0"
           step="0.5" value="${t.discomfort}" ${t.locked ? "disabled" : ""}></td>
      <td><input class="lock-input" data-test="${esc(t.name)}" type="checkbox"
           ${t.locked ? "checked" : ""} title="lock row against edits"></td>
    </tr>`,
    )
    .join("");
  return `
  <table class="tests-table">
    <thead><tr><th>Test</th><th>Cost (INR)</th><th>Discomfort (0-10)</th><th>Lock</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>
  <button id="save-tests" ${state.dirty ? "" : "disabled"}>Save attribute changes</button>`;
}

export function renderBudgetForm(state: AdvisorState): string {
  const isCost = state.mode === "cost";
  const label = isCost ? "Cost budget (INR)" : "Discomfort budget to remove (index)";
  const max = isCost ? 7000 : 50;
  const step = isCost ? 50 : 0.5;
  return `
  <fieldset class="budget-form">
    <legend>Budget</legend>
    <label><input type="radio" name="mode" value="cost" ${isCost ? "checked" : ""}>
      Cost</label>
    <label><input type="radio" name="mode" value="discomfort" ${isCost ? "" : "checked"}>
      Discomfort</label>
    <label id="budget-label">${label}
      <input id="budget-slider" type="range" min="0" max="${max}" step="${step}"
             value="${state.budget}">
      <input id="budget-number" type="number" min="0" step="${step}"
             value="${state.budget}">
    </label>
    <button id="submit-query" ${state.polling ? "disabled" : ""}>
      ${state.polling ? "Computing…" : "Find test options"}</button>
  </fieldset>`;
}

function faBar(option: ApiOption, maxFa: number): string {
  const width = maxFa > 0 ? Math.round((option.result.fa / maxFa) * 100) : 0;
  return `<div class="fa-bar"><div class="fa-bar-fill" style="width:${width}%"></div></div>`;
}

export function renderOptions(state: AdvisorState): string {
  if (state.invalidatedNotice) {
    return `<p class="stale-notice">Results cleared: test attributes changed.
      Submit the query again to recompute.</p>`;
  }
  if (state.polling) {
    return `<p class="polling-notice">Evaluating options…</p>`;
  }
  if (!state.options) {
    return `<p class="empty-notice">No options yet. Set a budget and submit.</p>`;
  }
  const best = bestOptionId(state.options);
  const maxFa = Math.max(...state.options.map((o) => o.result.fa), 0);
  const rows = state.options
    .map((o) => {
      const checked = state.compareSelection.includes(o.option_id);
      return `
      <tr data-option="${esc(o.option_id)}" class="${o.option_id === best ? "best-row" : ""}">
        <td>${o.option_id === best ? '<span class="best-badge">best</span>' : ""}</td>
        <td>${esc(o.option_id)}</td>
        <td title="${esc(o.kept_tests.join(", "))}">${o.kept_tests.length} kept</td>
        <td>${o.total_cost}</td>
        <td>${o.removed_discomfort}</td>
        <td class="fa-cell">${o.result.fa}${faBar(o, maxFa)}</td>
        <td>${o.result.fa_rate}</td>
        <td>${o.result.threshold}</td>
        <td>${o.result.accuracy}</td>
        <td><input class="compare-input" data-option="${esc(o.option_id)}"
             type="checkbox" ${checked ? "checked" : ""}></td>
      </tr>`;
    })
    .join("");
  return `
  <p class="run-note">run ${esc(state.runId ?? "")} · ${state.options.length} options,
    ranked by false abnormals (server order)</p>
  <table class="options-table">
    <thead><tr><th></th><th>Option</th><th>Tests</th><th>Cost</th>
      <th>Removed discomfort</th><th>FA</th><th>FA rate</th>
      <th>Threshold</th><th>Accuracy</th><th>Compare</th></tr></thead>
    <tbody>${rows}</tbody>
  </table>`;
}

export function renderCompare(state: AdvisorState): string {
  if (!state.options || state.compareSelection.length < 2) return "";
  const chosen = state.options.filter((o) =>
    state.compareSelection.includes(o.option_id),
  );
  const minFa = Math.min(...chosen.map((o) => o.result.fa));
  const columns = chosen
    .map(
      (o) => `
    <div class="compare-col" data-option="${esc(o.option_id)}">
      <h4>${esc(o.option_id)}</h4>
      <p class="fa-line">FA ${o.result.fa}
        <span class="fa-delta">(${o.result.fa === minFa ? "min" : `+${o.result.fa - minFa}`})</span></p>
      <p>cost ${o.total_cost} · removed discomfort ${o.removed_discomfort}</p>
      <h5>kept</h5><ul>${o.kept_tests.map((t) => `<li>${esc(t)}</li>`).join("")}</ul>
      <h5>removed</h5><ul>${o.removed_tests.map((t) => `<li>${esc(t)}</li>`).join("")}</ul>
    </div>`,
    )
    .join("");
  return `<div class="compare-panel">${columns}</div>`;
}

export function renderError(state: AdvisorState): string {
  return state.error ? `<p class="error-box">${esc(state.error)}</p>` : "";
}

export function renderPredictForm(state: AdvisorState): string {
  const result = state.prediction
    ? `<p class="predict-result ${state.prediction.decision}">
        decision <strong>${esc(state.prediction.decision)}</strong>
        · p(abnormal) ${state.prediction.p_abnormal}
        · threshold ${state.prediction.threshold}</p>`
    : "";
  const error = state.predictionError
    ? `<p class="error-box">${esc(state.predictionError)}</p>`
    : "";
  return `
  <details class="predict-form">
    <summary>Score a single record</summary>
    <p>Paste a record as JSON (field name to value, using the service's schema).</p>
    <textarea id="predict-record" rows="4" placeholder='{"sex": "female", ...}'></textarea>
    <button id="submit-predict">Score record</button>
    ${error}${result}
  </details>`;
}

export function renderApp(state: AdvisorState): string {
  return `
  <h1>Screening test advisor</h1>
  ${renderError(state)}
  <section id="tests-section"><h2>Clinical tests</h2>${renderTestTable(state)}</section>
  <section id="budget-section">${renderBudgetForm(state)}</section>
  <section id="options-section"><h2>Options</h2>${renderOptions(state)}</section>
  <section id="compare-section">${renderCompare(state)}</section>
  <section id="predict-section">${renderPredictForm(state)}</section>`;
}
