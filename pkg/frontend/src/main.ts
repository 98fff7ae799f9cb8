/** Bootstrap: wire the DOM to the API client through pure state transitions. */

import { ApiError, ForestLabClient } from "./api.js";
import { renderState, type ViewElements } from "./render.js";
import {
  initialState,
  withBusy,
  withError,
  withSession,
  withTurn,
  withUpload,
  type AppState,
} from "./state.js";

function byId<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function errorText(err: unknown): string {
  if (err instanceof ApiError) {
    return err.field ? `${err.message} (${err.field})` : err.message;
  }
  return err instanceof Error ? err.message : String(err);
}

export function startApp(): void {
  const client = new ForestLabClient("");
  let state: AppState = initialState;

  const view: ViewElements = {
    status: byId("status-line"),
    transcript: byId("transcript"),
    gallery: byId("gallery"),
    sendButton: byId<HTMLButtonElement>("send-btn"),
    uploadButton: byId<HTMLButtonElement>("upload-btn"),
  };
  const fileA = byId<HTMLInputElement>("file-a");
  const fileB = byId<HTMLInputElement>("file-b");
  const fileMask = byId<HTMLInputElement>("file-mask");
  const pairIdInput = byId<HTMLInputElement>("pair-id");
  const chatInput = byId<HTMLInputElement>("chat-input");
  const plannerSelect = byId<HTMLSelectElement>("planner-select");

  const repaint = () => {
    renderState(view, state, (artifactId) =>
      state.sessionId ? client.artifactUrl(state.sessionId, artifactId) : "#",
    );
  };
  const update = (next: AppState) => {
    state = next;
    repaint();
  };

  const refreshArtifacts = async (): Promise<void> => {
    if (!state.sessionId) return;
    const record = await client.getSession(state.sessionId);
    update({ ...state, artifacts: record.artifacts });
  };

  const uploadPair = async (): Promise<void> => {
    const a = fileA.files?.[0];
    const b = fileB.files?.[0];
    if (!state.sessionId || !a || !b) {
      update(withError(state, "choose both epoch images first"));
      return;
    }
    update(withBusy(state, true));
    try {
      const result = await client.uploadPair(state.sessionId, {
        imageA: a,
        imageB: b,
        mask: fileMask.files?.[0] ?? null,
        pairId: pairIdInput.value.trim() || null,
      });
      const record = await client.getSession(state.sessionId);
      update(withUpload(state, result, record.artifacts));
    } catch (err) {
      update(withError(state, errorText(err)));
    }
  };

  const sendMessage = async (): Promise<void> => {
    const text = chatInput.value.trim();
    if (!state.sessionId || !text) return;
    update(withBusy(state, true));
    try {
      const planner = plannerSelect.value === "llm" ? "llm" : "deterministic";
      const turn = await client.sendMessage(state.sessionId, text, planner);
      const record = await client.getSession(state.sessionId);
      chatInput.value = "";
      update(withTurn(state, turn, record.artifacts));
    } catch (err) {
      update(withError(state, errorText(err)));
    }
  };

  view.uploadButton.addEventListener("click", () => void uploadPair());
  view.sendButton.addEventListener("click", () => void sendMessage());
  chatInput.addEventListener("keydown", (event) => {
    if (event.key === "Enter") void sendMessage();
  });

  repaint();
  void (async () => {
    try {
      await client.health();
      const sessionId = await client.createSession();
      update(withSession(state, sessionId));
      await refreshArtifacts();
    } catch (err) {
      update(withError(state, `cannot reach service: ${errorText(err)}`));
    }
  })();
}

startApp();
