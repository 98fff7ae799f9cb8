import { describe, expect, it } from "vitest";

import type { ArtifactRecord, TurnRecord, UploadResult } from "../src/api.js";
import {
  initialState,
  latestOfKind,
  mergeArtifacts,
  withError,
  withSession,
  withTurn,
  withUpload,
} from "../src/state.js";

function artifact(id: string, kind = "mask"): ArtifactRecord {
  return { id, kind, summary: `${kind} ${id}`, source_tool: "t", inputs: [], data: {} };
}

const upload: UploadResult = { pair_id: "pair1", width: 64, height: 64, artifact_ids: ["a1"] };

function turn(message: string): TurnRecord {
  return {
    message,
    plan: { steps: [], rationale: null, source: "deterministic", fallback: false },
    calls: [],
    answer: "ok",
    artifact_ids: [],
  };
}

describe("mergeArtifacts", () => {
  it("orders by artifact number, not lexically", () => {
    const merged = mergeArtifacts([artifact("a10")], [artifact("a2"), artifact("a1")]);
    expect(merged.map((a) => a.id)).toEqual(["a1", "a2", "a10"]);
  });

  it("is an append-only union where fresh records win", () => {
    const stale = { ...artifact("a1"), summary: "old" };
    const fresh = { ...artifact("a1"), summary: "new" };
    const merged = mergeArtifacts([stale, artifact("a2")], [fresh]);
    expect(merged.map((a) => a.id)).toEqual(["a1", "a2"]);
    expect(merged[0]?.summary).toBe("new");
  });
});

describe("state transitions", () => {
  it("starting a session resets everything else", () => {
    const dirty = withError({ ...initialState, pairId: "p" }, "boom");
    const next = withSession(dirty, "s7");
    expect(next).toEqual({ ...initialState, sessionId: "s7" });
  });

  it("an upload records the pair and merges its artifacts", () => {
    const base = withSession(initialState, "s1");
    const next = withUpload(base, upload, [artifact("a1", "pair")]);
    expect(next.pairId).toBe("pair1");
    expect(next.referenceMask).toBeNull();
    expect(next.artifacts.map((a) => a.id)).toEqual(["a1"]);
  });

  it("an upload with a mask part records the reference artifact", () => {
    const base = withSession(initialState, "s1");
    const withMask: UploadResult = { ...upload, artifact_ids: ["a1", "a2"] };
    const next = withUpload(base, withMask, [artifact("a1", "pair"), artifact("a2", "mask")]);
    expect(next.referenceMask).toBe("a2");
  });

  it("turns append and clear transient error state", () => {
    const base = withError(withSession(initialState, "s1"), "transient");
    const next = withTurn(base, turn("hi"), [artifact("a3", "stats")]);
    expect(next.error).toBeNull();
    expect(next.turns.map((t) => t.message)).toEqual(["hi"]);
    const again = withTurn(next, turn("more"), []);
    expect(again.turns.map((t) => t.message)).toEqual(["hi", "more"]);
  });
});

describe("latestOfKind", () => {
  it("returns the highest-numbered artifact of the kind", () => {
    const state = {
      ...initialState,
      artifacts: [artifact("a1", "pair"), artifact("a2", "mask"), artifact("a4", "mask")],
    };
    expect(latestOfKind(state, "mask")?.id).toBe("a4");
    expect(latestOfKind(state, "overlay")).toBeUndefined();
  });
});
