import { describe, expect, it } from "vitest";

import { calibrate, LabelEvent, resolveVerdicts } from "../src/calibration.js";
import { ReviewApiClient } from "../src/client.js";
import { MockReviewServer, MockSample } from "./mock_server.js";

// Deterministic linear-congruential stream so runs are reproducible.
function* lcg(seed: number): Generator<number> {
  let state = seed >>> 0;
  while (true) {
    state = (state * 1664525 + 1013904223) >>> 0;
    yield state / 2 ** 32;
  }
}

function buildFixture(seed: number, nSamples: number, nLabels: number) {
  const rand = lcg(seed);
  const next = () => rand.next().value as number;
  const samples: MockSample[] = Array.from({ length: nSamples }, (_, i) => ({
    sample_id: `s${String(i).padStart(3, "0")}`,
    instruction: `edit ${i}`,
    score: Math.round(next() * 100),
  }));
  const annotators = ["a1", "a2", "a3"];
  const labels: LabelEvent[] = Array.from({ length: nLabels }, (_, i) => ({
    sample_id: samples[Math.floor(next() * nSamples)]!.sample_id,
    verdict: next() < 0.6 ? "keep" : "discard",
    annotator_id: annotators[Math.floor(next() * annotators.length)]!,
    timestamp: i + 1,
  }));
  return { samples, labels };
}

describe("client-side calibration", () => {
  it("resolves last-write-wins, majority, tie-discard", () => {
    const labels: LabelEvent[] = [
      { sample_id: "a", verdict: "discard", annotator_id: "x", timestamp: 1 },
      { sample_id: "a", verdict: "keep", annotator_id: "x", timestamp: 2 },
      { sample_id: "b", verdict: "keep", annotator_id: "x", timestamp: 3 },
      { sample_id: "b", verdict: "discard", annotator_id: "y", timestamp: 4 },
      { sample_id: "c", verdict: "keep", annotator_id: "x", timestamp: 5 },
      { sample_id: "c", verdict: "keep", annotator_id: "y", timestamp: 6 },
      { sample_id: "c", verdict: "discard", annotator_id: "z", timestamp: 7 },
    ];
    const verdicts = resolveVerdicts(labels);
    expect(verdicts.get("a")).toBe("keep");
    expect(verdicts.get("b")).toBe("discard");
    expect(verdicts.get("c")).toBe("keep");
  });

  it("throws when a labeled sample has no judge score", () => {
    const labels: LabelEvent[] = [
      { sample_id: "ghost", verdict: "keep", annotator_id: "x", timestamp: 1 },
    ];
    expect(() => calibrate(labels, new Map(), 80)).toThrowError(/ghost/);
  });

  it("matches the server confusion matrix for the same label stream", async () => {
    const { samples, labels } = buildFixture(0xc0ffee, 40, 120);
    const server = new MockReviewServer(samples);
    const client = new ReviewApiClient("", server.fetch);
    // Replay in timestamp order so the server log sees the same history.
    for (const label of labels) {
      await client.submitLabel({
        sample_id: label.sample_id,
        verdict: label.verdict,
        annotator_id: label.annotator_id,
      });
    }
    const scores = new Map(samples.map((s) => [s.sample_id, s.score]));
    for (const t of [50, 80, 95]) {
      const remote = await client.calibration(t);
      const local = calibrate(labels, scores, t);
      expect(local.counts).toEqual(remote.counts);
      expect(local.total).toBe(remote.total);
      expect(local.accuracy).toBeCloseTo(remote.accuracy, 9);
    }
  });

  it("accuracy is the share of agreeing cells", () => {
    const { samples, labels } = buildFixture(7, 25, 60);
    const scores = new Map(samples.map((s) => [s.sample_id, s.score]));
    const report = calibrate(labels, scores, 80);
    const agree = report.counts.good_keep + report.counts.bad_discard;
    expect(report.accuracy).toBeCloseTo((100 * agree) / report.total, 9);
    expect(report.total).toBe(
      Object.values(report.counts).reduce((a, b) => a + b, 0),
    );
  });
});
