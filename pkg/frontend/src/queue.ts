import { ReviewApiClient } from "./client.js";
import { LabelSubmission } from "./types.js";

export interface QueueOptions {
  /** Delay between retry sweeps, ms. Tests inject 0. */
  retryDelayMs?: number;
  /** Give up after this many consecutive failed sweeps (0 = never). */
  maxSweeps?: number;
}

/**
 * In-order, at-least-once delivery of verdicts.
 *
 * Submissions survive network failures: a failed POST keeps the verdict at
 * the head of the queue and a later flush retries it. The server log is
 * last-write-wins per annotator, so re-delivering after an ambiguous
 * failure is harmless.
 */
export class SubmissionQueue {
  private queue: LabelSubmission[] = [];
  private flushing = false;

  constructor(
    private readonly client: ReviewApiClient,
    private readonly options: QueueOptions = {},
  ) {}

  get pendingCount(): number {
    return this.queue.length;
  }

  enqueue(label: LabelSubmission): void {
    this.queue.push(label);
  }

  /** Drain the queue, retrying until empty or the sweep budget runs out. */
  async flush(): Promise<void> {
    if (this.flushing) return;
    this.flushing = true;
    try {
      const { retryDelayMs = 500, maxSweeps = 0 } = this.options;
      let sweeps = 0;
      while (this.queue.length > 0) {
        const head = this.queue[0]!;
        try {
          await this.client.submitLabel(head);
          this.queue.shift();
          sweeps = 0;
        } catch {
          sweeps += 1;
          if (maxSweeps > 0 && sweeps >= maxSweeps) return;
          if (retryDelayMs > 0) {
            await new Promise((resolve) => setTimeout(resolve, retryDelayMs));
          }
        }
      }
    } finally {
      this.flushing = false;
    }
  }
}
