/** Poll a selection job until it is done, failed, or aborted.
 *
 * An AbortSignal cancels the loop between polls: the session keeps at
 * most one live poll, and a newer submission aborts the older one.
 */

import type { ApiClient } from "./api.js";
import type { ApiSelectResult } from "./types.js";

export class PollAborted extends Error {
  constructor() {
    super("polling aborted");
  }
}

const sleep = (ms: number, signal?: AbortSignal) =>
  new Promise<void>((resolve, reject) => {
    if (signal?.aborted) {
      reject(new PollAborted());
      return;
    }
    const timer = setTimeout(() => {
      signal?.removeEventListener("abort", onAbort);
      resolve();
    }, ms);
    const onAbort = () => {
      clearTimeout(timer);
      reject(new PollAborted());
    };
    signal?.addEventListener("abort", onAbort, { once: true });
  });

export async function pollSelectJob(
  api: ApiClient,
  jobId: string,
  opts: { intervalMs?: number; signal?: AbortSignal } = {},
): Promise<ApiSelectResult> {
  const interval = opts.intervalMs ?? 500;
  for (;;) {
    if (opts.signal?.aborted) throw new PollAborted();
    const job = await api.getJob(jobId);
    if (job.status === "done" && job.result) return job.result;
    if (job.status === "failed") throw new Error(job.error ?? "selection job failed");
    await sleep(interval, opts.signal);
  }
}
