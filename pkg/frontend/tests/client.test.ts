import { describe, expect, it } from "vitest";

import { ApiError, ReviewApiClient } from "../src/client.js";
import { MockReviewServer } from "./mock_server.js";

function server() {
  return new MockReviewServer([
    { sample_id: "s1", instruction: "change the color to red", score: 95 },
    { sample_id: "s2", instruction: "add pockets", score: 40 },
    { sample_id: "s3", instruction: "remove the hood", score: 88 },
  ]);
}

describe("ReviewApiClient", () => {
  it("lists pending items and validates their shape", async () => {
    const client = new ReviewApiClient("", server().fetch);
    const pending = await client.pending();
    expect(pending.map((p) => p.sample_id)).toEqual(["s1", "s2", "s3"]);
    expect(pending[0]!.original_uri).toBe("/api/v1/images/s1/person");
    expect(pending[0]!.edited_uri).toBe("/api/v1/images/s1/person_edit");
  });

  it("shrinks pending as labels arrive and reflects verdicts in items", async () => {
    const srv = server();
    const client = new ReviewApiClient("", srv.fetch);
    await client.submitLabel({
      sample_id: "s2",
      verdict: "discard",
      annotator_id: "a1",
    });
    expect((await client.pending()).map((p) => p.sample_id)).toEqual([
      "s1",
      "s3",
    ]);
    const items = await client.items();
    expect(items.find((i) => i.sample_id === "s2")!.verdict).toBe("discard");
    expect(items.find((i) => i.sample_id === "s1")!.verdict).toBeNull();
  });

  it("resolves repeated labels last-write-wins per annotator", async () => {
    const srv = server();
    const client = new ReviewApiClient("", srv.fetch);
    await client.submitLabel({ sample_id: "s1", verdict: "discard", annotator_id: "a1" });
    await client.submitLabel({ sample_id: "s1", verdict: "keep", annotator_id: "a1" });
    const items = await client.items();
    expect(items.find((i) => i.sample_id === "s1")!.verdict).toBe("keep");
  });

  it("resolves cross-annotator ties to discard", async () => {
    const srv = server();
    const client = new ReviewApiClient("", srv.fetch);
    await client.submitLabel({ sample_id: "s1", verdict: "keep", annotator_id: "a1" });
    await client.submitLabel({ sample_id: "s1", verdict: "discard", annotator_id: "a2" });
    const items = await client.items();
    expect(items.find((i) => i.sample_id === "s1")!.verdict).toBe("discard");
  });

  it("raises ApiError with the HTTP status on failures", async () => {
    const client = new ReviewApiClient("", server().fetch);
    await expect(
      client.submitLabel({ sample_id: "nope", verdict: "keep", annotator_id: "a" }),
    ).rejects.toThrowError(ApiError);
    await expect(
      client.submitLabel({ sample_id: "nope", verdict: "keep", annotator_id: "a" }),
    ).rejects.toMatchObject({ status: 404 });
  });

  it("fetches the calibration report at an explicit threshold", async () => {
    const srv = server();
    const client = new ReviewApiClient("", srv.fetch);
    await client.submitLabel({ sample_id: "s1", verdict: "keep", annotator_id: "a" });
    await client.submitLabel({ sample_id: "s2", verdict: "discard", annotator_id: "a" });
    const report = await client.calibration(80);
    expect(report.threshold).toBe(80);
    expect(report.counts).toEqual({
      good_keep: 1,
      good_discard: 0,
      bad_keep: 0,
      bad_discard: 1,
    });
    expect(report.accuracy).toBeCloseTo(100, 9);
  });

  it("builds image URLs from the base url", () => {
    const client = new ReviewApiClient("http://host:1", server().fetch);
    expect(client.imageUrl("s1", "person_edit")).toBe(
      "http://host:1/api/v1/images/s1/person_edit",
    );
  });
});
