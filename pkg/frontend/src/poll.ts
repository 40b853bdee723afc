import { StudioClient } from "./api.js";
import { JobDoc } from "./types.js";

export class JobFailed extends Error {
  constructor(readonly job: JobDoc) {
    super(job.error_detail ?? `job ${job.job_id} failed`);
    this.name = "JobFailed";
  }
}

export class JobTimeout extends Error {
  constructor(jobId: string) {
    super(`job ${jobId} did not settle in time`);
    this.name = "JobTimeout";
  }
}

export interface PollOptions {
  /** The service contract is polling; default matches the 1 s cadence. */
  intervalMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export async function pollJob(
  client: StudioClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobDoc> {
  const intervalMs = options.intervalMs ?? 1000;
  const timeoutMs = options.timeoutMs ?? 120_000;
  const sleep = options.sleep ?? defaultSleep;
  let waited = 0;
  for (;;) {
    const job = await client.getJob(jobId);
    if (job.status === "done") return job;
    if (job.status === "failed") throw new JobFailed(job);
    if (waited >= timeoutMs) throw new JobTimeout(jobId);
    await sleep(intervalMs);
    waited += intervalMs;
  }
}
