/** DOM construction. Deliberately dumb: all logic lives in state.ts/format.ts. */

import type { ArtifactRecord, TurnRecord } from "./api.js";
import { artifactLabel, describeStep, isImageKind, planLine } from "./format.js";
import type { AppState } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function turnItem(turn: TurnRecord): HTMLElement {
  const item = el("li", "turn");
  item.appendChild(el("div", "turn-message", `you: ${turn.message}`));
  item.appendChild(el("div", "turn-plan", `plan: ${planLine(turn.plan)}`));
  const steps = el("ul", "turn-steps");
  for (const step of turn.calls) {
    steps.appendChild(el("li", "turn-step", describeStep(step)));
  }
  if (turn.calls.length > 0) item.appendChild(steps);
  item.appendChild(el("div", "turn-answer", turn.answer));
  return item;
}

function artifactCard(
  artifact: ArtifactRecord,
  urlFor: (artifactId: string) => string,
): HTMLElement {
  const card = el("div", "artifact-card");
  card.dataset.artifactId = artifact.id;
  card.dataset.kind = artifact.kind;
  card.appendChild(el("div", "artifact-label", artifactLabel(artifact)));
  if (isImageKind(artifact.kind)) {
    const img = el("img", "artifact-image");
    img.src = urlFor(artifact.id);
    img.alt = artifact.summary;
    img.loading = "lazy";
    card.appendChild(img);
  } else {
    const link = el("a", "artifact-link", "open json");
    link.href = urlFor(artifact.id);
    link.target = "_blank";
    card.appendChild(link);
  }
  card.appendChild(el("div", "artifact-summary", artifact.summary));
  return card;
}

export interface ViewElements {
  status: HTMLElement;
  transcript: HTMLElement;
  gallery: HTMLElement;
  sendButton: HTMLButtonElement;
  uploadButton: HTMLButtonElement;
}

export function renderState(
  view: ViewElements,
  state: AppState,
  urlFor: (artifactId: string) => string,
): void {
  const parts: string[] = [];
  parts.push(state.sessionId ? `session ${state.sessionId}` : "no session");
  if (state.pairId) parts.push(`pair ${state.pairId}`);
  if (state.referenceMask) parts.push(`reference ${state.referenceMask}`);
  if (state.busy) parts.push("working…");
  view.status.textContent = parts.join(" · ");
  view.status.classList.toggle("error", state.error !== null);
  if (state.error) view.status.textContent = `error: ${state.error}`;

  view.sendButton.disabled = state.busy || state.pairId === null;
  view.uploadButton.disabled = state.busy || state.sessionId === null;

  view.transcript.replaceChildren(...state.turns.map(turnItem));
  view.gallery.replaceChildren(
    ...state.artifacts.map((artifact) => artifactCard(artifact, urlFor)),
  );
}
