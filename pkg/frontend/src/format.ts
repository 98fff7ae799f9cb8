/** Pure text formatting for the UI; kept out of the DOM layer for testability. */

import type { ArtifactRecord, PlanRecord, PlanStep } from "./api.js";

export function formatPercent(value: number): string {
  return value.toFixed(1);
}

export function describeStep(step: PlanStep): string {
  const args = Object.entries(step.args)
    .map(([key, value]) => `${key}=${String(value)}`)
    .join(", ");
  let text = args ? `${step.tool}(${args})` : `${step.tool}()`;
  if (step.cached) text += " ·cached";
  if (step.error) text += ` ·failed: ${step.error}`;
  return text;
}

export function planLine(plan: PlanRecord): string {
  const tools = plan.steps.map((step) => step.tool).join(" → ");
  let origin = plan.source;
  if (plan.fallback) origin += ", fallback";
  return tools ? `${tools} (${origin})` : `no tools (${origin})`;
}

export function isImageKind(kind: string): boolean {
  return kind === "pair" || kind === "mask" || kind === "overlay";
}

function dataHighlight(artifact: ArtifactRecord): string | null {
  const data = artifact.data;
  if (artifact.kind === "mask" && typeof data.change_percent === "number") {
    return `change ${formatPercent(data.change_percent)}%`;
  }
  if (artifact.kind === "stats" && typeof data.change_percent === "number") {
    const patches = typeof data.num_patches === "number" ? data.num_patches : null;
    return patches === null
      ? `change ${formatPercent(data.change_percent)}%`
      : `change ${formatPercent(data.change_percent)}% in ${patches} patch${patches === 1 ? "" : "es"}`;
  }
  if (artifact.kind === "pair" && typeof data.width === "number" && typeof data.height === "number") {
    return `${data.width}×${data.height}`;
  }
  return null;
}

export function artifactLabel(artifact: ArtifactRecord): string {
  const highlight = dataHighlight(artifact);
  const base = `${artifact.id} · ${artifact.kind}`;
  return highlight ? `${base} · ${highlight}` : base;
}
