import { ReviewApiClient } from "./client.js";
import { SubmissionQueue } from "./queue.js";
import { CalibrationReport, ReviewItem, Verdict } from "./types.js";

/**
 * Headless labeling session: a queue of pending items, one current item,
 * keyboard-style verdict entry, and a live confusion-matrix panel. DOM
 * bindings attach on top of this (see main.ts); tests drive it directly.
 */
export class ReviewSession {
  private pending: ReviewItem[] = [];
  private cursor = 0;
  readonly labeled: { sample_id: string; verdict: Verdict }[] = [];
  calibrationPanel: CalibrationReport | null = null;

  constructor(
    private readonly client: ReviewApiClient,
    private readonly queue: SubmissionQueue,
    readonly annotatorId: string,
  ) {}

  async load(): Promise<void> {
    this.pending = await this.client.pending();
    this.cursor = 0;
  }

  get current(): ReviewItem | null {
    return this.pending[this.cursor] ?? null;
  }

  get remaining(): number {
    return this.pending.length - this.cursor;
  }

  /** "k" keeps, "d" discards, anything else is ignored. */
  async handleKey(key: string): Promise<void> {
    if (key === "k") await this.label("keep");
    else if (key === "d") await this.label("discard");
  }

  async label(verdict: Verdict): Promise<void> {
    const item = this.current;
    if (!item) return;
    this.queue.enqueue({
      sample_id: item.sample_id,
      verdict,
      annotator_id: this.annotatorId,
    });
    this.labeled.push({ sample_id: item.sample_id, verdict });
    this.cursor += 1;
    await this.queue.flush();
  }

  async refreshCalibration(threshold?: number): Promise<CalibrationReport> {
    this.calibrationPanel = await this.client.calibration(threshold);
    return this.calibrationPanel;
  }
}
