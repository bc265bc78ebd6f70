import { z } from "zod";
import {
  CalibrationReport,
  LabeledItem,
  LabelSubmission,
  ReviewItem,
} from "./types.js";

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/** Typed client for the /api/v1 review contract. */
export class ReviewApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = fetch as unknown as FetchLike,
  ) {}

  private async get<T>(path: string, schema: z.ZodType<T>): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1${path}`);
    if (!resp.ok) throw new ApiError(resp.status, `GET ${path} -> ${resp.status}`);
    return schema.parse(await resp.json());
  }

  pending(): Promise<ReviewItem[]> {
    return this.get("/pending", z.array(ReviewItem));
  }

  items(): Promise<LabeledItem[]> {
    return this.get("/items", z.array(LabeledItem));
  }

  calibration(threshold?: number): Promise<CalibrationReport> {
    const query = threshold === undefined ? "" : `?t=${threshold}`;
    return this.get(`/calibration${query}`, CalibrationReport);
  }

  async submitLabel(label: LabelSubmission): Promise<void> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/v1/labels`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(label),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, `POST /labels -> ${resp.status}`);
    }
  }

  imageUrl(sampleId: string, role: "person" | "person_edit"): string {
    return `${this.baseUrl}/api/v1/images/${sampleId}/${role}`;
  }
}
