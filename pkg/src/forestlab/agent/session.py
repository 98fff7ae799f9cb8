"""Session state, artifact store, plan execution, and the turn loop.

A session owns an append-only turn history and an id→artifact store. Plan
execution runs steps in order, caches results by (tool, canonical args,
input artifact ids), and aborts remaining steps on the first failure while
leaving every previously created artifact intact.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from ..analytics import ConfusionCounts, MaskStats
from ..captions import CaptionSet
from ..errors import ForestLabError, ToolExecutionError
from ..raster import ChangeMask, ImagePair, Raster, mask_to_png_bytes, \
    raster_to_png_bytes
from .planner import Plan, StepStatus, ToolCall
from .registry import ToolRegistry, default_registry

_session_counter = itertools.count(1)


@dataclass(frozen=True)
class Artifact:
    id: str
    kind: str  # pair | mask | stats | captions | overlay | report
    payload: object
    summary: str
    source_tool: str
    inputs: tuple[str, ...] = ()

    def to_record(self) -> dict:
        """Structured representation; payload serialized by kind."""
        body: object
        payload = self.payload
        if isinstance(payload, ImagePair):
            body = {"pair_id": payload.id,
                    "width": payload.epoch_a.width,
                    "height": payload.epoch_a.height}
        elif isinstance(payload, ChangeMask):
            changed = int((payload.labels > 0).sum())
            total = payload.width * payload.height
            body = {"width": payload.width, "height": payload.height,
                    "changed_px": changed,
                    "change_percent": 100.0 * changed / total,
                    "provenance": payload.provenance.value}
        elif isinstance(payload, MaskStats):
            body = payload.to_dict()
        elif isinstance(payload, CaptionSet):
            body = payload.to_dict()
        elif isinstance(payload, ConfusionCounts):
            body = payload.to_dict()
        elif isinstance(payload, Raster):
            body = {"width": payload.width, "height": payload.height,
                    "channels": payload.channels}
        elif isinstance(payload, dict):
            body = payload
        else:
            body = {"value": str(payload)}
        return {"id": self.id, "kind": self.kind, "summary": self.summary,
                "source_tool": self.source_tool, "inputs": list(self.inputs),
                "data": body}

    def to_bytes(self) -> tuple[bytes, str]:
        """(payload bytes, content type) for HTTP artifact downloads."""
        if isinstance(self.payload, ChangeMask):
            return mask_to_png_bytes(self.payload), "image/png"
        if isinstance(self.payload, Raster):
            return raster_to_png_bytes(self.payload), "image/png"
        text = json.dumps(self.to_record()["data"], indent=2, sort_keys=True)
        return text.encode(), "application/json"


@dataclass
class TurnResult:
    plan: Plan
    calls: list[ToolCall]
    created: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c.status is StepStatus.OK for c in self.calls)

    @property
    def failure(self) -> str | None:
        for i, c in enumerate(self.calls, start=1):
            if c.status is StepStatus.FAILED:
                return f"step {i} ({c.tool}) failed: {c.error}"
        return None

    def cited_ids(self) -> list[str]:
        return [c.result_ref for c in self.calls if c.result_ref]


@dataclass
class TurnRecord:
    message: str
    plan: Plan
    calls: list[ToolCall]
    answer: str
    artifact_ids: list[str]

    def to_dict(self) -> dict:
        return {"message": self.message, "plan": self.plan.to_dict(),
                "calls": [c.to_dict() for c in self.calls],
                "answer": self.answer, "artifact_ids": list(self.artifact_ids)}


class Session:
    """Single-writer conversation state. The service layer serializes turns."""

    def __init__(self, session_id: str | None = None,
                 registry: ToolRegistry | None = None):
        self.id = session_id or f"s{next(_session_counter)}"
        self.registry = registry or default_registry()
        self.turns: list[TurnRecord] = []
        self.artifacts: dict[str, Artifact] = {}
        self.pair: ImagePair | None = None
        self.pair_ref: str | None = None  # artifact id of the loaded pair
        self.reference_ref: str | None = None  # artifact id of reference mask
        self._artifact_counter = itertools.count(1)
        self._cache: dict[tuple, str] = {}

    # --- artifact store -------------------------------------------------------

    def new_artifact_id(self) -> str:
        return f"a{next(self._artifact_counter)}"

    def add_artifact(self, kind: str, payload, summary: str, source_tool: str,
                     inputs: tuple[str, ...] = ()) -> Artifact:
        art = Artifact(id=self.new_artifact_id(), kind=kind, payload=payload,
                       summary=summary, source_tool=source_tool, inputs=inputs)
        self.artifacts[art.id] = art
        return art

    def get_artifact(self, artifact_id: str) -> Artifact:
        try:
            return self.artifacts[artifact_id]
        except KeyError:
            raise ToolExecutionError(
                f"no artifact with id {artifact_id!r}") from None

    def latest_artifact(self, kind: str) -> Artifact | None:
        for art in reversed(list(self.artifacts.values())):
            if art.kind == kind:
                return art
        return None

    # --- state the tools rely on ----------------------------------------------

    def attach_pair(self, pair: ImagePair, *, source_tool: str = "upload") -> Artifact:
        """Register a pair (from upload or load_pair) as the session's subject."""
        summary = f"image pair {pair.id} ({pair.epoch_a.width}x{pair.epoch_a.height})"
        art = self.add_artifact("pair", pair, summary, source_tool)
        self.pair = pair
        self.pair_ref = art.id
        return art

    def attach_reference_mask(self, mask: ChangeMask, *,
                              source_tool: str = "upload") -> Artifact:
        summary = f"reference mask ({mask.width}x{mask.height})"
        art = self.add_artifact("mask", mask, summary, source_tool)
        self.reference_ref = art.id
        return art

    def require_pair(self) -> ImagePair:
        if self.pair is None:
            raise ToolExecutionError("no pair loaded: upload or load a "
                                     "bi-temporal pair first")
        return self.pair

    def pair_id_or_default(self) -> str:
        return self.pair.id if self.pair is not None else "session"

    def resolve_mask(self, ref: str, role: str = "mask") -> tuple[str, ChangeMask]:
        """Map an artifact reference to (id, mask).

        "auto" takes the most recent mask artifact — preferring one that is
        not the session reference when a candidate is wanted — and
        "reference" takes the session's reference mask. Explicit ids must
        name a mask artifact.
        """
        if ref == "reference":
            if self.reference_ref is None:
                raise ToolExecutionError(
                    f"no reference mask loaded (needed as {role})")
            ref = self.reference_ref
        elif ref == "auto":
            art = None
            if role == "candidate":
                for prior in reversed(list(self.artifacts.values())):
                    if prior.kind == "mask" and prior.id != self.reference_ref:
                        art = prior
                        break
            if art is None:
                art = self.latest_artifact("mask")
            if art is None:
                raise ToolExecutionError(
                    f"no mask artifact available (needed as {role})")
            ref = art.id
        art = self.get_artifact(ref)
        if not isinstance(art.payload, ChangeMask):
            raise ToolExecutionError(
                f"artifact {ref!r} is a {art.kind}, not a mask")
        return ref, art.payload

    def summary(self) -> str:
        """Compact state description for planner prompts."""
        lines = [f"session {self.id}: {len(self.turns)} prior turns"]
        if self.pair is not None:
            lines.append(f"loaded pair {self.pair.id} "
                         f"({self.pair.epoch_a.width}x{self.pair.epoch_a.height})"
                         f" as {self.pair_ref}")
        else:
            lines.append("no pair loaded")
        if self.reference_ref:
            lines.append(f"reference mask: {self.reference_ref}")
        for art in list(self.artifacts.values())[-6:]:
            lines.append(f"artifact {art.id} ({art.kind}): {art.summary}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {"session_id": self.id,
                "pair_id": self.pair.id if self.pair else None,
                "reference_mask": self.reference_ref,
                "turns": [t.to_dict() for t in self.turns],
                "artifacts": [a.to_record() for a in self.artifacts.values()]}


# --- execution ------------------------------------------------------------------


def _canonical_args(args: dict) -> str:
    return json.dumps(args, sort_keys=True, separators=(",", ":"), default=str)


def execute_plan(plan: Plan, session: Session) -> TurnResult:
    """Run steps in order with per-step caching and abort-on-failure."""
    calls = [ToolCall(tool=s.tool, args=dict(s.args)) for s in plan.steps]
    result = TurnResult(plan=plan, calls=calls)
    for call in calls:
        spec = session.registry.get(call.tool)
        try:
            resolved_inputs = _resolve_inputs(call, session)
            key = (call.tool, _canonical_args(call.args), resolved_inputs)
            if key in session._cache:
                call.result_ref = session._cache[key]
                call.status = StepStatus.OK
                call.cached = True
                continue
            payload, summary, inputs = spec.run(session, **call.args)
            art = session.add_artifact(spec.result_kind, payload, summary,
                                       spec.name, tuple(inputs))
            if spec.name == "load_pair":
                session.pair = payload
                session.pair_ref = art.id
            elif spec.name == "load_prediction":
                session.reference_ref = art.id
            session._cache[key] = art.id
            call.result_ref = art.id
            call.status = StepStatus.OK
            result.created.append(art.id)
        except ForestLabError as exc:
            call.status = StepStatus.FAILED
            call.error = str(exc)
            break
        except (OSError, ValueError) as exc:
            call.status = StepStatus.FAILED
            call.error = f"{type(exc).__name__}: {exc}"
            break
    return result


def _resolve_inputs(call: ToolCall, session: Session) -> tuple[str, ...]:
    """Pre-resolve the artifact ids a call will consume, for the cache key.

    Mirrors the resolution each tool performs, without side effects. Unknown
    references resolve to their literal value so the miss still executes the
    tool (which then raises the real error).
    """
    refs: list[str] = []
    for name, value in call.args.items():
        if name in ("mask", "gt", "pred", "a", "b") and isinstance(value, str):
            role = "candidate" if name == "pred" else "mask"
            try:
                rid, _ = session.resolve_mask(value, role=role)
                refs.append(rid)
            except ToolExecutionError:
                refs.append(f"unresolved:{value}")
    if call.tool in ("detect_changes", "render_overlay"):
        refs.append(session.pair_ref or "unresolved:pair")
    return tuple(refs)


def respond(session: Session, message: str, planner: str = "deterministic",
            llm_config=None, llm_client=None, composer: str | None = None) -> TurnRecord:
    """One full turn: plan, execute, compose, append to history."""
    from .compose import compose_response
    from .planner import plan_deterministic, plan_with_llm

    if planner == "llm":
        plan = plan_with_llm(message, session, session.registry,
                             config=llm_config, client=llm_client)
    else:
        plan = plan_deterministic(message, session, session.registry)

    turn = execute_plan(plan, session)
    mode = composer or ("llm" if planner == "llm" else "template")
    answer = compose_response(turn, session, mode=mode,
                              llm_config=llm_config, llm_client=llm_client)
    record = TurnRecord(message=message, plan=plan, calls=turn.calls,
                        answer=answer, artifact_ids=turn.created)
    session.turns.append(record)
    return record
