/** Live round-trip against a running advisor service.
 *
 * Skipped unless ADVISOR_URL points at a service (e.g.
 * `zeromiss serve --address 127.0.0.1:8731` then
 * `ADVISOR_URL=http://127.0.0.1:8731 npx vitest run integration`).
 * The (cost, 2000) query retrains one pipeline per option, so this can
 * take a few minutes on the default cohort.
 */

import { describe, expect, it } from "vitest";

import { ApiClient } from "./api.js";
import { pollSelectJob } from "./poll.js";
import {
  beginSubmission,
  bestOptionId,
  editsApplied,
  editTest,
  initialState,
  submissionSucceeded,
  tableForUpload,
  withTests,
} from "./state.js";
import { renderOptions } from "./views.js";

const BASE = process.env.ADVISOR_URL;

describe.skipIf(!BASE)("live service round trip", () => {
  it(
    "renders exactly the ranked options the API returns",
    { timeout: 600_000 },
    async () => {
      const api = new ApiClient(BASE!);
      const table = await api.getTests();
      expect(table.tests.length).toBeGreaterThan(0);

      let state = withTests(initialState(), table.tests);
      state = beginSubmission(state);
      const { job_id } = await api.postSelect("cost", 2000);
      const result = await pollSelectJob(api, job_id, { intervalMs: 1000 });
      state = submissionSucceeded(state, state.submission, result.options,
                                  result.run_id);

      // round-trip fidelity: rendered rows match the payload, in order
      const html = renderOptions(state);
      const order = [...html.matchAll(/<tr data-option="([^"]+)"/g)].map((m) => m[1]);
      expect(order).toEqual(result.options.map((o) => o.option_id));
      for (const opt of result.options) {
        expect(html).toContain(`>${opt.result.fa}<`);
        expect(html).toContain(`>${opt.result.threshold}<`);
      }

      // ranking is ascending in FA and the badge sits on the minimum
      const fas = result.options.map((o) => o.result.fa);
      expect([...fas].sort((a, b) => a - b)).toEqual(fas);
      const best = bestOptionId(result.options)!;
      expect(html).toContain(`<tr data-option="${best}" class="best-row"`);

      // the default table reproduces the 12-option case study
      expect(result.options).toHaveLength(12);

      // editing a cost invalidates displayed results until resubmission
      state = editTest(state, table.tests[0]!.name, {
        cost: table.tests[0]!.cost + 10,
      });
      const saved = await api.putTests(tableForUpload(state));
      state = editsApplied(state, saved.tests);
      expect(state.options).toBeNull();
      expect(state.invalidatedNotice).toBe(true);
      expect(renderOptions(state)).toContain("Results cleared");

      // resubmitting recomputes against the edited attributes
      state = beginSubmission(state);
      const second = await api.postSelect("cost", 2000);
      const recomputed = await pollSelectJob(api, second.job_id, { intervalMs: 1000 });
      state = submissionSucceeded(state, state.submission, recomputed.options,
                                  recomputed.run_id);
      expect(state.invalidatedNotice).toBe(false);
      expect(state.options).not.toBeNull();
      expect(state.runId).not.toBe(result.run_id);
    },
  );
});
