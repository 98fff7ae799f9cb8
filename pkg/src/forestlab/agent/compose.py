"""Answer composition: deterministic template sentences or LLM prose.

Both modes obey one grounding contract: every number in the answer must
trace to a cited artifact record (or to a step index / reported error). The
template composer is the deterministic reference; the LLM composer is
audited after generation and falls back to the template on any violation.
"""

from __future__ import annotations

import json
import re

from ..captions import severity_bucket
from ..errors import EndpointUnreachable, GroundingViolation
from .llm import LlmClient, LlmConfig
from .planner import HELP_TEXT, StepStatus
from .session import Session, TurnResult

_NUMBER_RE = re.compile(r"(?<![A-Za-z0-9_.])(\d+(?:\.\d+)?)(?![A-Za-z0-9_])")


# --- grounding audit -----------------------------------------------------------------

def _number_variants(value: float) -> set[str]:
    out = {str(value), f"{value:.1f}", f"{value:.2f}"}
    if float(value) == int(value):
        out.add(str(int(value)))
    return out


def _collect_allowed(node, allowed: set[str]) -> None:
    if isinstance(node, bool) or node is None:
        return
    if isinstance(node, (int, float)):
        allowed.update(_number_variants(float(node)))
        return
    if isinstance(node, str):
        allowed.update(_NUMBER_RE.findall(node))
        return
    if isinstance(node, dict):
        for v in node.values():
            _collect_allowed(v, allowed)
        return
    if isinstance(node, (list, tuple)):
        allowed.add(str(len(node)))
        for v in node:
            _collect_allowed(v, allowed)


def allowed_numbers(records, extra: tuple[str, ...] = ()) -> set[str]:
    allowed: set[str] = set(extra)
    for record in records:
        _collect_allowed(record, allowed)
    return allowed


def audit_grounding(answer: str, records, extra: tuple[str, ...] = ()) -> None:
    """Raise GroundingViolation if the answer quotes an unsourced number."""
    allowed = allowed_numbers(records, extra)
    for token in _NUMBER_RE.findall(answer):
        if token not in allowed:
            raise GroundingViolation(
                f"number {token!r} in answer has no source artifact")


def _audit_extras(turn: TurnResult) -> tuple[str, ...]:
    extras = [str(i) for i in range(1, len(turn.calls) + 1)]
    for call in turn.calls:
        if call.error:
            extras.extend(_NUMBER_RE.findall(call.error))
    return tuple(extras)


# --- template composer ---------------------------------------------------------------

_DIRECTION_PHRASE = {"loss": "forest loss", "gain": "vegetation gain",
                     "both": "change"}


def _cells_phrase(dominant_cells) -> str:
    return " and ".join(dominant_cells) if dominant_cells else "scene"


def _sentence_for(call, session: Session) -> str:
    art = session.get_artifact(call.result_ref)
    data = art.to_record()["data"]
    aid = art.id
    tool = call.tool
    if tool == "load_pair":
        return (f"Loaded image pair {data['pair_id']} at {data['width']} by "
                f"{data['height']} pixels [{aid}].")
    if tool == "load_prediction":
        return (f"Loaded the external mask at {data['width']} by "
                f"{data['height']} pixels; it is now the session reference "
                f"[{aid}].")
    if tool == "detect_changes":
        phrase = _DIRECTION_PHRASE.get(call.args.get("direction", "loss"),
                                       "change")
        text = (f"Change detection marked {data['change_percent']:.1f} percent "
                f"of the scene as {phrase} [{aid}].")
        if "no change detected" in art.summary:
            text += " Note: the difference field was constant."
        return text
    if tool == "compute_stats":
        percent = data["change_percent"]
        if percent == 0:
            if call.args.get("emphasis") == "location":
                return f"No change location can be identified [{aid}]."
            return f"No forest change is present in this pair [{aid}]."
        severity = severity_bucket(percent).name
        cells = _cells_phrase(data.get("dominant_cells", ()))
        if call.args.get("emphasis") == "location":
            return (f"The change is concentrated in the {cells} of the scene; "
                    f"{percent:.1f} percent of pixels changed [{aid}].")
        n = data["num_patches"]
        patches = "patch" if n == 1 else "patches"
        return (f"The change covers {percent:.1f} percent of the scene, a "
                f"{severity} change, across {n} {patches}; it is concentrated "
                f"in the {cells} [{aid}].")
    if tool == "generate_captions":
        texts = [c["text"] for c in data["captions"]]
        return (f"Generated {len(texts)} captions [{aid}]: "
                + " / ".join(texts) + ".")
    if tool == "render_overlay":
        return (f"Rendered the comparison overlay at {data['width']} by "
                f"{data['height']} pixels [{aid}]: agreement in yellow, "
                f"false alarms in red, misses in green.")
    if tool == "evaluate_pair":
        scores = data["scores"]

        def fmt(v):
            return "undefined" if v is None else f"{v:.2f}"

        return (f"Against the reference mask: change IoU "
                f"{fmt(scores['iou_c'])}, no-change IoU "
                f"{fmt(scores['iou_nc'])}, mIoU {fmt(scores['miou'])} [{aid}].")
    if tool == "dataset_summary":
        n = data["n_pairs"]
        return (f"Dataset {data['dataset_id']}: {n['total']} pairs "
                f"({n['train']} train, {n['val']} val, {n['test']} test); "
                f"coverage mean {data['coverage_mean']:.2f} percent, max "
                f"{data['coverage_max']:.2f} percent; vocabulary of "
                f"{data['vocabulary_size']} words [{aid}].")
    if tool == "compare_masks":
        return (f"The two masks agree on {data['tp']} changed pixels; "
                f"{data['fp']} pixels are changed only in the second and "
                f"{data['fn']} only in the first [{aid}].")
    return f"Completed {tool} [{aid}]."


def compose_template(turn: TurnResult, session: Session) -> str:
    if not turn.calls:
        return HELP_TEXT
    sentences = []
    for i, call in enumerate(turn.calls, start=1):
        if call.status is StepStatus.OK:
            sentences.append(_sentence_for(call, session))
        elif call.status is StepStatus.FAILED:
            sentences.append(f"Step {i} ({call.tool}) failed: {call.error}.")
            break
    answer = " ".join(sentences)
    records = [session.get_artifact(aid).to_record()
               for aid in turn.cited_ids()]
    audit_grounding(answer, records, _audit_extras(turn))
    return answer


# --- LLM composer --------------------------------------------------------------------

def _compose_llm(turn: TurnResult, session: Session,
                 config: LlmConfig | None, client: LlmClient | None) -> str:
    records = [session.get_artifact(aid).to_record()
               for aid in turn.cited_ids()]
    owns_client = client is None
    if client is None:
        if config is None:
            config = LlmConfig.from_env()
        if config is None:
            return compose_template(turn, session)
        client = LlmClient(config)
    try:
        context = json.dumps(records, indent=1, sort_keys=True)
        failure = turn.failure
        prompt = (
            "Write a short answer to the user's analysis request using ONLY "
            "the numbers that appear in these artifact records. Quote each "
            "number exactly as written, cite artifact ids in square "
            "brackets, and do not invent values.\n\n"
            f"Artifacts:\n{context}\n"
            + (f"\nFailure to report: {failure}\n" if failure else ""))
        answer = client.complete([
            {"role": "system", "content": "You summarize computed analysis "
                                          "results without changing any "
                                          "number."},
            {"role": "user", "content": prompt}])
        audit_grounding(answer, records, _audit_extras(turn))
        return answer
    except (EndpointUnreachable, GroundingViolation):
        return compose_template(turn, session)
    finally:
        if owns_client and client is not None:
            client.close()


def compose_response(turn: TurnResult, session: Session,
                     mode: str = "template",
                     llm_config: LlmConfig | None = None,
                     llm_client: LlmClient | None = None) -> str:
    """Compose the user-facing answer for an executed turn."""
    if mode == "llm":
        return _compose_llm(turn, session, llm_config, llm_client)
    return compose_template(turn, session)
