import { execFile, spawn, ChildProcess } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { calibrate, LabelEvent } from "../src/calibration.js";
import { FetchLike, ReviewApiClient } from "../src/client.js";
import { SubmissionQueue } from "../src/queue.js";
import { ReviewSession } from "../src/session.js";

const run = promisify(execFile);

/**
 * End-to-end check against the real Python review server: generate a small
 * run with the CLI, serve it, label through the client, and verify the
 * client-side confusion matrix agrees with GET /calibration.
 */

let workdir: string;
let server: ChildProcess | undefined;
let baseUrl: string;
let scores: Map<string, number>;

const realFetch: FetchLike = (url, init) => fetch(url, init);

async function waitForServer(url: string): Promise<void> {
  for (let attempt = 0; attempt < 100; attempt += 1) {
    try {
      const resp = await fetch(url);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error(`server at ${url} never came up`);
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "review-ui-"));
  const root = join(workdir, "store");
  await run("garmentlab", [
    "synth-catalog", "--root", root, "-n", "10",
    "--seed", "5", "--width", "48", "--height", "64",
  ]);
  const config = join(workdir, "cfg.yaml");
  writeFileSync(
    config,
    `seed: 5\nstorage_root: ${root}\noversampling: 1\nresolution: [48, 64]\n`,
  );
  await run("garmentlab", [
    "generate", "--config", config, "--catalog", join(root, "catalog.json"),
    "--run-id", "demo",
  ]);

  const manifest = join(root, "runs", "demo", "manifest.jsonl");
  scores = new Map();
  for (const line of readFileSync(manifest, "utf-8").trim().split("\n")) {
    const record = JSON.parse(line) as {
      sample_id?: string;
      scores?: { person?: { s: number } };
    };
    const s = record.scores?.person?.s;
    if (record.sample_id && s !== undefined) scores.set(record.sample_id, s);
  }

  const port = 8710 + (process.pid % 500);
  baseUrl = `http://127.0.0.1:${port}`;
  server = spawn("garmentlab", [
    "serve-review", "--manifest", manifest,
    "--labels", join(workdir, "labels.jsonl"), "--port", String(port),
  ], { stdio: "ignore" });
  await waitForServer(`${baseUrl}/api/v1/pending`);
}, 120_000);

afterAll(() => {
  server?.kill();
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

describe("against the real review server", () => {
  it("labels every pending item and matches server calibration", async () => {
    const client = new ReviewApiClient(baseUrl, realFetch);
    const queue = new SubmissionQueue(client, { retryDelayMs: 0 });
    const session = new ReviewSession(client, queue, "it-annotator");
    await session.load();
    expect(session.remaining).toBeGreaterThan(0);

    const labels: LabelEvent[] = [];
    let i = 0;
    while (session.current) {
      const verdict = i % 3 === 0 ? "discard" : "keep";
      labels.push({
        sample_id: session.current.sample_id,
        verdict,
        annotator_id: "it-annotator",
        timestamp: i + 1,
      });
      await session.label(verdict);
      i += 1;
    }
    expect(queue.pendingCount).toBe(0);
    expect((await client.pending())).toHaveLength(0);

    for (const t of [80, 100]) {
      const remote = await client.calibration(t);
      const local = calibrate(labels, scores, t);
      expect(local.counts).toEqual(remote.counts);
      expect(local.total).toBe(remote.total);
      expect(local.accuracy).toBeCloseTo(remote.accuracy, 9);
    }
  }, 60_000);

  it("serves PNG images for labeled samples", async () => {
    const client = new ReviewApiClient(baseUrl, realFetch);
    const items = await client.items();
    const resp = await fetch(
      client.imageUrl(items[0]!.sample_id, "person_edit"),
    );
    expect(resp.ok).toBe(true);
    const bytes = new Uint8Array(await resp.arrayBuffer());
    expect([...bytes.slice(0, 4)]).toEqual([0x89, 0x50, 0x4e, 0x47]);
  });
});
