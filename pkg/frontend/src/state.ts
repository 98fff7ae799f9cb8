/** Pure application-state transitions; the DOM layer only renders this. */

import type { ArtifactRecord, TurnRecord, UploadResult } from "./api.js";

export interface AppState {
  sessionId: string | null;
  pairId: string | null;
  referenceMask: string | null;
  busy: boolean;
  error: string | null;
  turns: TurnRecord[];
  artifacts: ArtifactRecord[];
}

export const initialState: AppState = {
  sessionId: null,
  pairId: null,
  referenceMask: null,
  busy: false,
  error: null,
  turns: [],
  artifacts: [],
};

function artifactNumber(id: string): number {
  const m = /^a(\d+)$/.exec(id);
  return m ? Number(m[1]) : Number.MAX_SAFE_INTEGER;
}

/**
 * Union by id in artifact-number order. Artifact ids are append-only on the
 * server, so merging a fresh listing never reorders or drops what the UI
 * already shows; fresher records win on content.
 */
export function mergeArtifacts(
  existing: ArtifactRecord[],
  incoming: ArtifactRecord[],
): ArtifactRecord[] {
  const byId = new Map<string, ArtifactRecord>();
  for (const artifact of existing) byId.set(artifact.id, artifact);
  for (const artifact of incoming) byId.set(artifact.id, artifact);
  return [...byId.values()].sort(
    (a, b) => artifactNumber(a.id) - artifactNumber(b.id) || a.id.localeCompare(b.id),
  );
}

export function withSession(state: AppState, sessionId: string): AppState {
  return { ...initialState, sessionId };
}

export function withBusy(state: AppState, busy: boolean): AppState {
  return { ...state, busy, error: busy ? null : state.error };
}

export function withError(state: AppState, message: string): AppState {
  return { ...state, busy: false, error: message };
}

export function withUpload(
  state: AppState,
  result: UploadResult,
  artifacts: ArtifactRecord[],
): AppState {
  return {
    ...state,
    busy: false,
    error: null,
    pairId: result.pair_id,
    referenceMask: result.artifact_ids.length > 1 ? (result.artifact_ids[1] ?? null) : state.referenceMask,
    artifacts: mergeArtifacts(state.artifacts, artifacts),
  };
}

export function withTurn(
  state: AppState,
  turn: TurnRecord,
  artifacts: ArtifactRecord[],
): AppState {
  return {
    ...state,
    busy: false,
    error: null,
    turns: [...state.turns, turn],
    artifacts: mergeArtifacts(state.artifacts, artifacts),
  };
}

export function latestOfKind(state: AppState, kind: string): ArtifactRecord | undefined {
  for (let i = state.artifacts.length - 1; i >= 0; i -= 1) {
    const artifact = state.artifacts[i];
    if (artifact && artifact.kind === kind) return artifact;
  }
  return undefined;
}
