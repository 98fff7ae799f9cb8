"""Planners: turn a user message into a validated sequence of tool calls.

Two planners share one validation path. The deterministic planner maps
message keywords to fixed tool sequences and needs no network; the LLM
planner prompts a chat endpoint for a fenced JSON plan, retries once on a
malformed reply, and falls back to the deterministic planner (flagged) when
the endpoint is unreachable or keeps failing validation.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from ..captions import normalize_tokens
from ..errors import EndpointUnreachable, InvalidPlan, PlanTooLong, UnknownTool
from .llm import LlmClient, LlmConfig
from .registry import ToolRegistry

MAX_PLAN_STEPS = 8

PROMPT_ASSET = "assets/agent_prompt.txt"

_FENCE_RE = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)
_PATHISH_RE = re.compile(r"[/\\]|\.\w{2,4}$")


class StepStatus(Enum):
    PENDING = "pending"
    OK = "ok"
    FAILED = "failed"


@dataclass
class ToolCall:
    tool: str
    args: dict
    status: StepStatus = StepStatus.PENDING
    result_ref: str | None = None
    error: str | None = None
    cached: bool = False

    def to_dict(self) -> dict:
        return {"tool": self.tool, "args": dict(self.args),
                "status": self.status.value, "result_ref": self.result_ref,
                "error": self.error, "cached": self.cached}


@dataclass(frozen=True)
class Plan:
    steps: tuple[ToolCall, ...]
    rationale: str | None = None
    source: str = "deterministic"  # or "llm"
    fallback: bool = False

    def to_dict(self) -> dict:
        return {"steps": [s.to_dict() for s in self.steps],
                "rationale": self.rationale, "source": self.source,
                "fallback": self.fallback}


def validate_plan(raw_steps, registry: ToolRegistry, *,
                  source: str = "deterministic",
                  rationale: str | None = None) -> Plan:
    """Check step count, tool existence, and argument shapes; apply defaults."""
    if not isinstance(raw_steps, (list, tuple)):
        raise InvalidPlan("plan must be a list of steps")
    if len(raw_steps) > MAX_PLAN_STEPS:
        raise PlanTooLong(f"plan has {len(raw_steps)} steps; "
                          f"maximum is {MAX_PLAN_STEPS}")
    calls = []
    for i, step in enumerate(raw_steps):
        if isinstance(step, ToolCall):
            name, args = step.tool, step.args
        elif isinstance(step, dict):
            name = step.get("tool")
            args = step.get("args", {})
        else:
            raise InvalidPlan(f"step {i}: expected an object with tool/args")
        if not isinstance(name, str):
            raise InvalidPlan(f"step {i}: missing tool name")
        spec = registry.get(name)  # raises UnknownTool
        calls.append(ToolCall(tool=name, args=spec.validate_args(args)))
    return Plan(steps=tuple(calls), rationale=rationale, source=source)


# --- deterministic planner -----------------------------------------------------------

_EVAL_WORDS = frozenset({"evaluate", "score", "scoring", "iou", "miou"})
_DATASET_WORDS = frozenset({"dataset", "manifest", "stats", "statistics",
                            "summary", "summarize"})
_CAPTION_WORDS = frozenset({"caption", "captions", "describe", "description",
                            "words"})
_WHERE_WORDS = frozenset({"where", "location", "located", "distribution",
                          "region"})
_OVERLAY_WORDS = frozenset({"overlay", "show", "render", "visualize",
                            "visualise", "display"})
_AMOUNT_WORDS = frozenset({"lost", "loss", "much", "percent", "percentage",
                           "change", "changed", "cover", "coverage", "area"})
_LOAD_WORDS = frozenset({"load", "upload", "open"})

HELP_TEXT = ("I can analyze a loaded bi-temporal pair. Try: 'load <imageA> "
             "<imageB>', 'how much forest was lost', 'where is the change', "
             "'describe the change', 'show the overlay', 'evaluate the "
             "prediction', or 'summarize dataset <manifest.json>'.")


def _pathish(raw_words: list[str]) -> list[str]:
    return [w for w in raw_words if _PATHISH_RE.search(w)]


def plan_deterministic(message: str, session, registry: ToolRegistry) -> Plan:
    """Keyword-rule planner; same message and session state give the same plan."""
    tokens = set(normalize_tokens(message))
    raw_words = message.split()
    paths = _pathish(raw_words)

    def build(steps, why):
        return validate_plan(steps, registry, source="deterministic",
                             rationale=why)

    if tokens & _LOAD_WORDS and len(paths) >= 2:
        steps = [{"tool": "load_pair",
                  "args": {"path_a": paths[0], "path_b": paths[1]}}]
        if len(paths) >= 3:
            steps.append({"tool": "load_prediction", "args": {"path": paths[2]}})
        return build(steps, "load imagery from the given paths")

    if tokens & _DATASET_WORDS:
        json_paths = [p for p in paths if p.lower().endswith(".json")]
        if json_paths:
            return build([{"tool": "dataset_summary",
                           "args": {"manifest": json_paths[0]}}],
                         "summarize the named manifest")

    if tokens & _EVAL_WORDS:
        return build([{"tool": "evaluate_pair", "args": {}}],
                     "score the candidate mask against the reference")

    if tokens & _CAPTION_WORDS:
        return build([{"tool": "detect_changes", "args": {}},
                      {"tool": "compute_stats", "args": {}},
                      {"tool": "generate_captions", "args": {}}],
                     "detect changes, then caption them")

    if tokens & _WHERE_WORDS:
        return build([{"tool": "detect_changes", "args": {}},
                      {"tool": "compute_stats",
                       "args": {"emphasis": "location"}}],
                     "detect changes, then locate them")

    if tokens & _OVERLAY_WORDS:
        return build([{"tool": "detect_changes", "args": {}},
                      {"tool": "render_overlay", "args": {}}],
                     "detect changes, then render the overlay")

    if tokens & _AMOUNT_WORDS:
        return build([{"tool": "detect_changes", "args": {}},
                      {"tool": "compute_stats", "args": {}}],
                     "detect changes, then quantify them")

    return Plan(steps=(), rationale="help", source="deterministic")


# --- LLM planner ---------------------------------------------------------------------

def load_prompt_sections() -> tuple[str, list[str]]:
    """Parse the versioned prompt asset into (preamble, exemplar blocks)."""
    text = resources.files("forestlab").joinpath(PROMPT_ASSET).read_text()
    preamble_lines: list[str] = []
    exemplars: list[list[str]] = []
    current: list[str] | None = None
    for line in text.splitlines():
        if line.startswith("#"):
            continue
        if line.startswith("== preamble"):
            current = preamble_lines
            continue
        if line.startswith("== exemplar"):
            exemplars.append([])
            current = exemplars[-1]
            continue
        if current is not None:
            current.append(line)
    return ("\n".join(preamble_lines).strip(),
            ["\n".join(block).strip() for block in exemplars])


def build_planner_prompt(message: str, session, registry: ToolRegistry) -> list[dict]:
    preamble, exemplars = load_prompt_sections()
    tool_doc = json.dumps(registry.describe(), indent=1)
    system = (f"{preamble}\n\nTools:\n{tool_doc}\n\n"
              + "\n\n".join(exemplars)).strip()
    return [{"role": "system", "content": system},
            {"role": "user",
             "content": f"Session state:\n{session.summary()}\n\n"
                        f"User message: {message}"}]


def parse_plan_block(text: str) -> list:
    """Extract the fenced JSON step list from a model reply."""
    match = _FENCE_RE.search(text)
    if not match:
        raise InvalidPlan("reply contains no fenced plan block")
    try:
        doc = json.loads(match.group(1))
    except json.JSONDecodeError as exc:
        raise InvalidPlan(f"plan block is not valid JSON: {exc}") from None
    if not isinstance(doc, list):
        raise InvalidPlan("plan block must be a JSON array of steps")
    return doc


def plan_with_llm(message: str, session, registry: ToolRegistry,
                  config: LlmConfig | None = None,
                  client: LlmClient | None = None) -> Plan:
    """Prompt the configured endpoint for a plan; one retry, then deterministic
    fallback flagged with `fallback=True`.
    """
    owns_client = client is None
    if client is None:
        if config is None:
            config = LlmConfig.from_env()
        if config is None:
            fallback = plan_deterministic(message, session, registry)
            return Plan(steps=fallback.steps, rationale="no endpoint configured",
                        source="llm", fallback=True)
        client = LlmClient(config)
    try:
        messages = build_planner_prompt(message, session, registry)
        last_error: str | None = None
        for _ in range(2):
            reply = client.complete(messages)  # may raise EndpointUnreachable
            try:
                raw_steps = parse_plan_block(reply)
                plan = validate_plan(raw_steps, registry, source="llm",
                                     rationale="planned by model")
                return plan
            except (InvalidPlan, UnknownTool) as exc:  # PlanTooLong included
                last_error = str(exc)
                messages = messages + [
                    {"role": "assistant", "content": reply},
                    {"role": "user",
                     "content": f"That plan was invalid: {last_error}. "
                                f"Reply again with one fenced JSON block."}]
        fallback = plan_deterministic(message, session, registry)
        return Plan(steps=fallback.steps,
                    rationale=f"model plan invalid ({last_error}); "
                              f"deterministic fallback",
                    source="llm", fallback=True)
    except EndpointUnreachable as exc:
        fallback = plan_deterministic(message, session, registry)
        return Plan(steps=fallback.steps,
                    rationale=f"endpoint unreachable ({exc}); "
                              f"deterministic fallback",
                    source="llm", fallback=True)
    finally:
        if owns_client and client is not None:
            client.close()
