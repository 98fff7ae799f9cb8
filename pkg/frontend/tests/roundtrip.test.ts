/**
 * Round trip against the real HTTP service: create a session, upload a
 * synthetic bi-temporal pair, chat, and verify that the overlay artifact the
 * client downloads is pixel-consistent with the server's own mask record.
 * Boots `forestlab serve` in a temp data root; requires the Python package
 * to be installed (see repository README).
 */

import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, mkdirSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { PNG } from "pngjs";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiError, ForestLabClient } from "../src/api.js";
import { classifyOverlay, sameBytes } from "../src/overlay.js";
import { formatPercent } from "../src/format.js";

const FOREST: readonly [number, number, number] = [52, 120, 48];
const SOIL: readonly [number, number, number] = [150, 108, 70];
const SIZE = 128;
const BOX = { x0: 44, y0: 44, x1: 84, y1: 84 }; // 40x40 => 1600 px, 9.765625%

/** Deterministic PRNG so both epochs share the exact same canopy texture. */
function mulberry32(seed: number): () => number {
  let s = seed >>> 0;
  return () => {
    s = (s + 0x6d2b79f5) >>> 0;
    let t = Math.imul(s ^ (s >>> 15), 1 | s);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function clip8(v: number): number {
  return Math.min(255, Math.max(0, Math.round(v)));
}

/**
 * Textured scene: flat colors would be collapsed by the server's radiometric
 * normalization (zero variance in the reference epoch), so we jitter
 * brightness per pixel the way real canopy imagery varies. The same `seed`
 * reproduces the same texture, keeping both epochs identical outside the box.
 */
function scenePng(
  size: number,
  inBox: (x: number, y: number) => boolean,
  boxColor: readonly [number, number, number],
  baseColor: readonly [number, number, number] = FOREST,
  seed = 1,
): Buffer {
  const rand = mulberry32(seed);
  const png = new PNG({ width: size, height: size });
  for (let y = 0; y < size; y += 1) {
    for (let x = 0; x < size; x += 1) {
      const offset = Math.floor(rand() * 25) - 12; // shared luminance texture
      const boxed = inBox(x, y);
      const [r, g, b] = boxed ? boxColor : baseColor;
      const jitter = boxed ? 0 : offset;
      const idx = (size * y + x) << 2;
      png.data[idx] = clip8(r + jitter);
      png.data[idx + 1] = clip8(g + jitter);
      png.data[idx + 2] = clip8(b + jitter);
      png.data[idx + 3] = 255;
    }
  }
  return PNG.sync.write(png);
}

const inBox = (x: number, y: number) =>
  x >= BOX.x0 && x < BOX.x1 && y >= BOX.y0 && y < BOX.y1;
const never = () => false;

function maskPng(size: number, on: (x: number, y: number) => boolean): Buffer {
  return scenePng(size, on, [255, 255, 255], [0, 0, 0]);
}

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.once("error", reject);
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address === null || typeof address === "string") {
        reject(new Error("could not allocate a port"));
        return;
      }
      const { port } = address;
      srv.close(() => resolve(port));
    });
  });
}

/** Write a 2-pair dataset with perfect predictions into the data root. */
function writeEvalFixture(dataRoot: string): void {
  const ds = join(dataRoot, "ds");
  for (const sub of ["A", "B", "label", "preds"]) mkdirSync(join(ds, sub), { recursive: true });
  const boxes: Record<string, (x: number, y: number) => boolean> = {
    t1: (x, y) => x >= 8 && x < 16 && y >= 8 && y < 16,
    t2: (x, y) => x >= 4 && x < 20 && y >= 10 && y < 20,
  };
  const texts: Record<string, string> = {
    t1: "trees were removed near the road",
    t2: "a forest patch was cleared for farmland",
  };
  for (const id of ["t1", "t2"]) {
    const on = boxes[id]!;
    writeFileSync(join(ds, "A", `${id}.png`), scenePng(32, never, SOIL));
    writeFileSync(join(ds, "B", `${id}.png`), scenePng(32, on, SOIL));
    writeFileSync(join(ds, "label", `${id}.png`), maskPng(32, on));
    writeFileSync(join(ds, "preds", `${id}.png`), maskPng(32, on));
  }
  const manifest = {
    id: "ui-e2e",
    root: ".",
    entries: ["t1", "t2"].map((id) => ({
      pair_id: id,
      a: `A/${id}.png`,
      b: `B/${id}.png`,
      mask: `label/${id}.png`,
      captions: [{ text: texts[id], origin: "human" }],
    })),
    splits: { train: [], val: [], test: ["t1", "t2"] },
  };
  writeFileSync(join(ds, "manifest.json"), JSON.stringify(manifest, null, 2));
  writeFileSync(join(ds, "cands.json"), JSON.stringify(texts));
}

let server: ChildProcess | null = null;
let serverLog = "";
let client: ForestLabClient;

beforeAll(async () => {
  const dataRoot = mkdtempSync(join(tmpdir(), "forestlab-ui-"));
  writeEvalFixture(dataRoot);
  const port = await freePort();
  server = spawn(
    "forestlab",
    ["serve", "--host", "127.0.0.1", "--port", String(port), "--data-root", dataRoot],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  server.stdout?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  server.stderr?.on("data", (chunk: Buffer) => (serverLog += chunk.toString()));
  const exited = new Promise<never>((_, reject) => {
    server?.once("exit", (code) =>
      reject(new Error(`service exited early (code ${code}):\n${serverLog}`)),
    );
  });

  client = new ForestLabClient(`http://127.0.0.1:${port}`);
  const deadline = Date.now() + 30_000;
  for (;;) {
    const ready = await Promise.race([
      client.health().then(() => true).catch(() => false),
      exited,
    ]);
    if (ready) break;
    if (Date.now() > deadline) throw new Error(`service never became healthy:\n${serverLog}`);
    await new Promise((resolve) => setTimeout(resolve, 150));
  }
});

afterAll(() => {
  server?.kill();
});

describe("UI round trip", () => {
  let sessionId: string;

  it("creates a session", async () => {
    sessionId = await client.createSession();
    expect(sessionId).toMatch(/^s\d+$/);
  });

  it("uploads a pair and the server registers it", async () => {
    const epochA = scenePng(SIZE, never, SOIL);
    const epochB = scenePng(SIZE, inBox, SOIL);
    const result = await client.uploadPair(sessionId, {
      imageA: new Blob([new Uint8Array(epochA)], { type: "image/png" }),
      imageB: new Blob([new Uint8Array(epochB)], { type: "image/png" }),
    });
    expect(result.width).toBe(SIZE);
    expect(result.height).toBe(SIZE);
    expect(result.artifact_ids).toEqual(["a1"]);

    const record = await client.getSession(sessionId);
    expect(record.pair_id).toBe(result.pair_id);
    expect(record.artifacts.map((a) => a.kind)).toContain("pair");
  });

  it("answers an overlay request with a cited plan", async () => {
    const turn = await client.sendMessage(sessionId, "show me an overlay of the change");
    const tools = turn.plan.steps.map((s) => s.tool);
    expect(tools).toContain("detect_changes");
    expect(tools).toContain("render_overlay");
    expect(turn.answer).toMatch(/\[a\d+\]/);
    expect(turn.artifact_ids.length).toBeGreaterThan(0);
  });

  it("serves an overlay artifact that matches the server's own mask record", async () => {
    const record = await client.getSession(sessionId);
    const overlay = record.artifacts.filter((a) => a.kind === "overlay").at(-1);
    const mask = record.artifacts.filter((a) => a.kind === "mask").at(-1);
    expect(overlay).toBeDefined();
    expect(mask).toBeDefined();
    const changedPx = mask!.data.changed_px as number;
    expect(changedPx).toBeGreaterThan(0);

    const first = await client.fetchArtifact(sessionId, overlay!.id);
    expect(first.contentType).toBe("image/png");
    const png = PNG.sync.read(Buffer.from(first.bytes));
    expect(png.width).toBe(SIZE);
    expect(png.height).toBe(SIZE);

    // no reference mask uploaded: every detected pixel renders as agreement
    const counts = classifyOverlay(new Uint8Array(png.data), png.width, png.height);
    expect(counts.agree).toBe(changedPx);
    expect(counts.falseAlarm).toBe(0);
    expect(counts.missed).toBe(0);

    const second = await client.fetchArtifact(sessionId, overlay!.id);
    expect(sameBytes(first.bytes, second.bytes)).toBe(true);
  });

  it("reports the loss percent consistently with the stats artifact", async () => {
    const turn = await client.sendMessage(sessionId, "how much forest was lost?");
    const cachedDetect = turn.calls.find((s) => s.tool === "detect_changes");
    expect(cachedDetect?.cached).toBe(true); // reuses the overlay turn's mask

    const record = await client.getSession(sessionId);
    const stats = record.artifacts.filter((a) => a.kind === "stats").at(-1);
    expect(stats).toBeDefined();
    const percent = stats!.data.change_percent as number;
    // detection on textured imagery lands within half a point of the planted box
    expect(Math.abs(percent - (100 * 1600) / (SIZE * SIZE))).toBeLessThan(0.5);
    expect(turn.answer).toContain(`${formatPercent(percent)} percent`);
  });

  it("rejects a blank message with the shared error shape", async () => {
    const err = await client.sendMessage(sessionId, "   ").catch((e: unknown) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect((err as ApiError).status).toBe(422);
    expect((err as ApiError).code).toBe("empty_message");
    expect((err as ApiError).field).toBe("text");
  });

  it("runs a dataset evaluation to completion through the client", async () => {
    const job = await client.startEval({
      manifest: "ds/manifest.json",
      pred_dir: "ds/preds",
      captions: "ds/cands.json",
    });
    expect(job.job_id).toMatch(/^j\d+$/);
    const done = await client.waitForEval(job.job_id);
    expect(done.status).toBe("done");
    const report = done.report as { seg: { miou: number }; cap: { b4: number } };
    expect(report.seg.miou).toBeCloseTo(100.0, 6);
    expect(report.cap.b4).toBeCloseTo(1.0, 6);
  });
});
