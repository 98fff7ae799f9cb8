"""Shared fixtures: random corpora, synthetic imagery on disk, tiny datasets."""

from __future__ import annotations

import json
import random
from pathlib import Path

import numpy as np
import pytest

from forestlab.raster import save_mask, save_raster
from forestlab.synthetic import make_loss_pair

VOCAB = ["forest", "trees", "cleared", "loss", "patch", "north", "area",
         "large", "small", "the", "a", "of"]

# One line per acceptance criterion, printed after the run summary.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_line("")
        terminalreporter.write_line("acceptance criteria:")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_corpus(rng: random.Random, max_pairs=10, max_tokens=12,
                  vocab=VOCAB):
    """(candidates, references) with 1..max_pairs pairs, 1..3 refs each."""
    n = rng.randint(1, max_pairs)

    def sentence():
        return [rng.choice(vocab) for _ in range(rng.randint(1, max_tokens))]

    candidates = [sentence() for _ in range(n)]
    references = [[sentence() for _ in range(rng.randint(1, 3))]
                  for _ in range(n)]
    return candidates, references


@pytest.fixture
def rng():
    return random.Random(20240817)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def synthetic_pair():
    return make_loss_pair()


@pytest.fixture
def pair_on_disk(tmp_path):
    """Noise-free synthetic pair written to PNG, with its ground truth."""
    pair, gt = make_loss_pair()
    path_a = tmp_path / "epoch_a.png"
    path_b = tmp_path / "epoch_b.png"
    mask_path = tmp_path / "truth.png"
    save_raster(pair.epoch_a, path_a)
    save_raster(pair.epoch_b, path_b)
    save_mask(gt, mask_path)
    return {"pair": pair, "gt": gt, "a": path_a, "b": path_b,
            "mask": mask_path}


def build_tiny_dataset(root: Path, n_pairs: int = 3, split: str = "test",
                       distinct_captions: bool = True):
    """Write a loadable dataset under `root` and return its manifest path.

    Predictions equal to ground truth go to `<root>/perfect_preds`. Each pair
    gets one human caption (distinct wording per pair by default, so that
    consensus metrics see a non-degenerate corpus).
    """
    for sub in ("A", "B", "label", "perfect_preds"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    phrases = [
        "trees were removed near the river bend",
        "a forest patch was cleared for farmland",
        "woodland loss appears along the road",
        "vegetation was cut in the hillside forest",
        "a small stand of trees disappeared",
    ]
    entries = []
    ids = []
    for i in range(1, n_pairs + 1):
        pid = f"t{i}"
        pair, gt = make_loss_pair(boxes=((30 + 10 * i, 40, 20 + 8 * i),),
                                  pair_id=pid, seed=i)
        save_raster(pair.epoch_a, root / "A" / f"{pid}.png")
        save_raster(pair.epoch_b, root / "B" / f"{pid}.png")
        save_mask(gt, root / "label" / f"{pid}.png")
        save_mask(gt, root / "perfect_preds" / f"{pid}.png")
        text = (phrases[(i - 1) % len(phrases)] if distinct_captions
                else phrases[0])
        entries.append({"pair_id": pid, "a": f"A/{pid}.png",
                        "b": f"B/{pid}.png", "mask": f"label/{pid}.png",
                        "captions": [{"text": text, "origin": "human"}]})
        ids.append(pid)
    manifest = {"id": "tiny", "root": ".", "entries": entries,
                "splits": {"train": [], "val": [], "test": []}}
    manifest["splits"][split] = ids
    path = root / "manifest.json"
    path.write_text(json.dumps(manifest, indent=1))
    return path


@pytest.fixture
def tiny_dataset(tmp_path):
    manifest = build_tiny_dataset(tmp_path / "ds")
    return {"manifest": manifest, "root": tmp_path / "ds",
            "pred_dir": tmp_path / "ds" / "perfect_preds"}
