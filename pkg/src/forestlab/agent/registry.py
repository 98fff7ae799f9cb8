"""Tool registry: typed specs for every analysis operation the planner may call.

Each tool is a plain function taking the session plus keyword arguments and
returning an artifact payload. Specs carry enough structure to validate plans
before execution and to serialize into planner prompts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..errors import DuplicateTool, InvalidPlan, ToolExecutionError, UnknownTool

PARAM_KINDS = ("string", "number", "integer", "boolean", "artifact")


@dataclass(frozen=True)
class ParamSpec:
    name: str
    kind: str  # one of PARAM_KINDS
    required: bool = False
    default: object = None
    description: str = ""

    def __post_init__(self):
        if self.kind not in PARAM_KINDS:
            raise ValueError(f"unknown parameter kind {self.kind!r}")

    def coerce(self, value, tool: str):
        """Validate/convert one argument value; raises InvalidPlan."""
        where = f"tool {tool!r}, parameter {self.name!r}"
        if self.kind == "string" or self.kind == "artifact":
            if not isinstance(value, str):
                raise InvalidPlan(f"{where}: expected string, got "
                                  f"{type(value).__name__}")
            return value
        if self.kind == "boolean":
            if not isinstance(value, bool):
                raise InvalidPlan(f"{where}: expected boolean")
            return value
        if self.kind == "integer":
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvalidPlan(f"{where}: expected integer")
            return value
        # number
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InvalidPlan(f"{where}: expected number")
        return float(value)


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: tuple[ParamSpec, ...]
    result_kind: str  # artifact kind the tool produces
    run: Callable = field(repr=False, compare=False)

    def __post_init__(self):
        names = [p.name for p in self.parameters]
        if len(names) != len(set(names)):
            raise ValueError(f"tool {self.name!r} has duplicate parameter names")

    def validate_args(self, args: dict) -> dict:
        """Return the full argument map with defaults applied; raises InvalidPlan."""
        if not isinstance(args, dict):
            raise InvalidPlan(f"tool {self.name!r}: args must be a mapping")
        known = {p.name: p for p in self.parameters}
        for key in args:
            if key not in known:
                raise InvalidPlan(f"tool {self.name!r}: unknown argument {key!r}")
        out = {}
        for p in self.parameters:
            if p.name in args:
                out[p.name] = p.coerce(args[p.name], self.name)
            elif p.required:
                raise InvalidPlan(f"tool {self.name!r}: missing required "
                                  f"argument {p.name!r}")
            else:
                out[p.name] = p.default
        return out

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description,
                "result_kind": self.result_kind,
                "parameters": [{"name": p.name, "kind": p.kind,
                                "required": p.required, "default": p.default,
                                "description": p.description}
                               for p in self.parameters]}


class ToolRegistry:
    def __init__(self):
        self._tools: dict[str, ToolSpec] = {}

    def register(self, spec: ToolSpec) -> None:
        if spec.name in self._tools:
            raise DuplicateTool(f"tool {spec.name!r} already registered")
        self._tools[spec.name] = spec

    def get(self, name: str) -> ToolSpec:
        try:
            return self._tools[name]
        except KeyError:
            raise UnknownTool(f"no tool named {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def __len__(self) -> int:
        return len(self._tools)

    def names(self) -> list[str]:
        return sorted(self._tools)

    def specs(self) -> list[ToolSpec]:
        return [self._tools[n] for n in self.names()]

    def describe(self) -> list[dict]:
        return [s.to_dict() for s in self.specs()]


# --- builtin tool implementations ---------------------------------------------------
# Each returns (payload, summary, input_artifact_ids). The session handles id
# assignment and storage.

def _tool_load_pair(session, path_a: str, path_b: str):
    from ..raster import load_image_pair
    pair = load_image_pair(path_a, path_b)
    aid_inputs = ()
    summary = (f"image pair {pair.id} ({pair.epoch_a.width}x"
               f"{pair.epoch_a.height})")
    return pair, summary, aid_inputs


def _tool_detect_changes(session, kernel_radius: int, min_area_px: int,
                         direction: str):
    from ..perception import DetectionParams, Direction, detect_changes
    pair = session.require_pair()
    params = DetectionParams(kernel_radius=kernel_radius,
                             min_area_px=min_area_px,
                             direction=Direction(direction))
    result = detect_changes(pair, params)
    mask = result.mask
    changed = int((mask.labels > 0).sum())
    percent = 100.0 * changed / (mask.width * mask.height)
    summary = f"change mask: {percent:.1f} percent of pixels changed"
    if result.warning:
        summary += f" ({result.warning})"
    inputs = (session.pair_ref,) if session.pair_ref else ()
    return mask, summary, inputs


def _tool_load_prediction(session, path: str):
    from ..raster import binarize_mask, load_mask
    mask = binarize_mask(load_mask(path))
    summary = f"external mask ({mask.width}x{mask.height})"
    return mask, summary, ()


def _tool_compute_stats(session, mask: str, emphasis: str):
    from ..analytics import compute_stats
    if emphasis not in ("none", "location"):
        raise InvalidPlan(f"compute_stats: emphasis must be 'none' or "
                          f"'location', got {emphasis!r}")
    mask_id, mask_obj = session.resolve_mask(mask)
    stats = compute_stats(mask_obj)
    summary = (f"stats: {stats.change_percent:.1f} percent changed in "
               f"{stats.num_patches} patches")
    return stats, summary, (mask_id,)


def _tool_generate_captions(session, mask: str):
    from ..analytics import compute_stats
    from ..captions import generate_rule_captions
    mask_id, mask_obj = session.resolve_mask(mask)
    stats = compute_stats(mask_obj)
    captions = generate_rule_captions(stats, pair_id=session.pair_id_or_default())
    summary = f"{len(captions.captions)} rule captions"
    return captions, summary, (mask_id,)


def _tool_render_overlay(session, gt: str, pred: str):
    from ..raster import render_comparison_overlay
    pred_id, pred_mask = session.resolve_mask(pred, role="candidate")
    try:
        gt_id, gt_mask = session.resolve_mask(gt, role="reference")
    except ToolExecutionError:
        # single-mask visualization: the detected mask against itself
        gt_id, gt_mask = pred_id, pred_mask
    pair = session.require_pair()
    overlay = render_comparison_overlay(gt_mask, pred_mask, base=pair.epoch_a)
    summary = f"comparison overlay ({overlay.width}x{overlay.height})"
    inputs = tuple(dict.fromkeys(
        [gt_id, pred_id] + ([session.pair_ref] if session.pair_ref else [])))
    return overlay, summary, inputs


def _tool_evaluate_pair(session, gt: str, pred: str):
    from ..analytics import compare_masks
    from ..metrics import iou_from_confusion
    gt_id, gt_mask = session.resolve_mask(gt, role="reference")
    pred_id, pred_mask = session.resolve_mask(pred, role="candidate")
    counts = compare_masks(gt_mask, pred_mask)
    scores = iou_from_confusion(counts)
    payload = {"confusion": counts.to_dict(), "scores": scores.to_dict()}
    summary = f"pair evaluation: miou {scores.miou:.2f}"
    return payload, summary, (gt_id, pred_id)


def _tool_dataset_summary(session, manifest: str):
    from ..datasets import corpus_statistics, load_manifest
    dataset = load_manifest(manifest)
    stats = corpus_statistics(dataset)
    payload = {"dataset_id": dataset.id, **stats.to_dict()}
    summary = (f"dataset {dataset.id}: {stats.n_pairs['total']} pairs, "
               f"mean coverage {stats.coverage_mean:.2f} percent")
    return payload, summary, ()


def _tool_compare_masks(session, a: str, b: str):
    from ..analytics import compare_masks
    a_id, mask_a = session.resolve_mask(a)
    b_id, mask_b = session.resolve_mask(b)
    counts = compare_masks(mask_a, mask_b)
    summary = (f"mask comparison: {counts.tp} agree-changed, "
               f"{counts.fp} only-second, {counts.fn} only-first")
    return counts, summary, (a_id, b_id)


def register_builtin_tools(registry: ToolRegistry) -> ToolRegistry:
    """Register the nine analysis tools; raises DuplicateTool on re-registration."""
    mask_param = ParamSpec("mask", "artifact", default="auto",
                           description="mask artifact id, or 'auto' for the "
                                       "most recent mask")
    specs = [
        ToolSpec(
            name="load_pair",
            description="Load a bi-temporal image pair from two files.",
            parameters=(
                ParamSpec("path_a", "string", required=True,
                          description="earlier epoch image path"),
                ParamSpec("path_b", "string", required=True,
                          description="later epoch image path"),
            ),
            result_kind="pair", run=_tool_load_pair),
        ToolSpec(
            name="detect_changes",
            description="Run classical vegetation-loss detection on the "
                        "loaded pair.",
            parameters=(
                ParamSpec("kernel_radius", "integer", default=1),
                ParamSpec("min_area_px", "integer", default=16),
                ParamSpec("direction", "string", default="loss",
                          description="loss, gain, or both"),
            ),
            result_kind="mask", run=_tool_detect_changes),
        ToolSpec(
            name="load_prediction",
            description="Load an externally produced change mask from a file; "
                        "it becomes the session's reference mask.",
            parameters=(ParamSpec("path", "string", required=True),),
            result_kind="mask", run=_tool_load_prediction),
        ToolSpec(
            name="compute_stats",
            description="Compute coverage, patch, and location statistics "
                        "for a change mask.",
            parameters=(
                mask_param,
                ParamSpec("emphasis", "string", default="none",
                          description="'location' highlights spatial "
                                      "distribution in the answer"),
            ),
            result_kind="stats", run=_tool_compute_stats),
        ToolSpec(
            name="generate_captions",
            description="Generate the four rule-based captions for a change "
                        "mask.",
            parameters=(mask_param,),
            result_kind="captions", run=_tool_generate_captions),
        ToolSpec(
            name="render_overlay",
            description="Render an agreement overlay of two masks on the "
                        "earlier image.",
            parameters=(
                ParamSpec("gt", "artifact", default="reference"),
                ParamSpec("pred", "artifact", default="auto"),
            ),
            result_kind="overlay", run=_tool_render_overlay),
        ToolSpec(
            name="evaluate_pair",
            description="Score a candidate mask against the reference mask "
                        "(IoU per class and mIoU).",
            parameters=(
                ParamSpec("gt", "artifact", default="reference"),
                ParamSpec("pred", "artifact", default="auto"),
            ),
            result_kind="report", run=_tool_evaluate_pair),
        ToolSpec(
            name="dataset_summary",
            description="Summarize a dataset manifest: split sizes, coverage, "
                        "caption statistics.",
            parameters=(ParamSpec("manifest", "string", required=True),),
            result_kind="report", run=_tool_dataset_summary),
        ToolSpec(
            name="compare_masks",
            description="Pixel-level confusion counts between two mask "
                        "artifacts.",
            parameters=(
                ParamSpec("a", "artifact", required=True),
                ParamSpec("b", "artifact", required=True),
            ),
            result_kind="stats", run=_tool_compare_masks),
    ]
    for spec in specs:
        registry.register(spec)
    return registry


def default_registry() -> ToolRegistry:
    return register_builtin_tools(ToolRegistry())
