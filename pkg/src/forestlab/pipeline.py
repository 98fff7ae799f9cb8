"""End-to-end runs shared by the CLI and the HTTP service.

`evaluate_manifest` wires manifests, prediction directories, and candidate
caption files into `evaluate_dataset`. The candidate caption file is JSON:
{pair_id: "caption text"} or {pair_id: ["token", ...]}.
"""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

from .captions import normalize_tokens
from .datasets import Dataset, load_manifest
from .errors import SchemaError
from .metrics import EvalReport, evaluate_dataset
from .perception import load_external_predictions


def _restrict(dataset: Dataset, split: str | None) -> Dataset:
    if split is None:
        return dataset
    ids = set(dataset.split_ids(split))
    entries = tuple(e for e in dataset.entries if e.pair_id in ids)
    return replace(dataset, entries=entries,
                   splits={split: dataset.splits.get(split, ())})


def load_candidate_captions(path: str | Path) -> dict[str, list[str]]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"caption file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("candidate captions must be an object keyed by pair id")
    out: dict[str, list[str]] = {}
    for pid, value in doc.items():
        if isinstance(value, str):
            tokens = normalize_tokens(value)
        elif isinstance(value, list) and all(isinstance(t, str) for t in value):
            tokens = normalize_tokens(" ".join(value))
        else:
            raise SchemaError(f"candidate for {pid!r} must be text or a "
                              f"token list")
        if not tokens:
            raise SchemaError(f"candidate for {pid!r} normalizes to zero tokens")
        out[pid] = tokens
    return out


def evaluate_manifest(manifest: str | Path | Dataset,
                      pred_dir: str | Path | None = None,
                      captions: str | Path | None = None,
                      split: str | None = None,
                      include_per_pair: bool = False) -> EvalReport:
    """Score predictions and/or candidate captions against a manifest.

    With `split` set, only that split's entries are scored. Prediction masks
    are matched by `<pred_dir>/<pair_id>.png`; candidate captions by pair id.
    """
    dataset = (manifest if isinstance(manifest, Dataset)
               else load_manifest(manifest))
    subset = _restrict(dataset, split)

    gt_masks = pred_masks = None
    if pred_dir is not None:
        pred_masks = load_external_predictions(Path(pred_dir), subset)
        gt_masks = {e.pair_id: e.load_mask(binarize=True)
                    for e in subset.entries}

    ref_captions = cand_captions = None
    if captions is not None:
        cand_captions = load_candidate_captions(captions)
        ref_captions = {}
        for entry in subset.entries:
            refs = [list(c.tokens) for c in entry.captions.captions]
            if not refs:
                raise SchemaError(f"pair {entry.pair_id!r} has no reference "
                                  f"captions in the manifest")
            ref_captions[entry.pair_id] = refs

    return evaluate_dataset(gt_masks=gt_masks, pred_masks=pred_masks,
                            ref_captions=ref_captions,
                            cand_captions=cand_captions,
                            dataset_id=subset.id,
                            include_per_pair=include_per_pair)
