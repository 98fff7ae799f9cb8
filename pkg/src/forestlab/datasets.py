"""Dataset manifests, splits, keyword subsetting, and corpus statistics.

A manifest is one JSON file: {id, root, entries, splits}. Entry paths are
relative to `root`; `root` itself may be relative, in which case it resolves
against the manifest file's directory. Referenced files are validated lazily,
when an entry's imagery is actually loaded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

from .analytics import MaskStats, compute_stats
from .captions import Caption, CaptionOrigin, CaptionSet, normalize_tokens
from .errors import (DanglingSplitRef, DuplicateId, EmptyKeywords, IdMismatch,
                     SchemaError)
from .raster import (ChangeMask, ImagePair, binarize_mask, load_image_pair,
                     load_mask)

SPLIT_NAMES = ("train", "val", "test")

DEFAULT_TREE_KEYWORDS = frozenset({
    "tree", "trees", "forest", "forests",
    "woodland", "woodlands", "woods", "vegetation",
})

COVERAGE_BIN_WIDTH = 5.0  # percent per histogram bin, 20 bins over [0, 100]


@dataclass(frozen=True)
class DatasetEntry:
    """One bi-temporal pair: relative imagery paths plus its caption set."""
    pair_id: str
    a: str
    b: str
    mask: str
    captions: CaptionSet
    root: Path

    def resolved_a_path(self) -> Path:
        return self.root / self.a

    def resolved_b_path(self) -> Path:
        return self.root / self.b

    def resolved_mask_path(self) -> Path:
        return self.root / self.mask

    def load_pair(self) -> ImagePair:
        return load_image_pair(self.resolved_a_path(), self.resolved_b_path(),
                               pair_id=self.pair_id)

    def load_mask(self, binarize: bool = True) -> ChangeMask:
        mask = load_mask(self.resolved_mask_path())
        return binarize_mask(mask) if binarize else mask

    def to_dict(self) -> dict:
        return {"pair_id": self.pair_id, "a": self.a, "b": self.b,
                "mask": self.mask,
                "captions": [{"text": c.text, "origin": c.origin.value}
                             for c in self.captions.captions]}


@dataclass(frozen=True)
class Dataset:
    id: str
    root: Path
    entries: tuple[DatasetEntry, ...]
    splits: dict[str, tuple[str, ...]]
    notes: tuple[str, ...] = field(default_factory=tuple)

    @cached_property
    def _by_id(self) -> dict[str, DatasetEntry]:
        return {e.pair_id: e for e in self.entries}

    def __len__(self) -> int:
        return len(self.entries)

    def entry(self, pair_id: str) -> DatasetEntry:
        try:
            return self._by_id[pair_id]
        except KeyError:
            raise IdMismatch([pair_id], context=f"dataset {self.id}") from None

    def split_ids(self, name: str) -> tuple[str, ...]:
        if name not in SPLIT_NAMES:
            raise SchemaError(f"unknown split {name!r}; expected one of {SPLIT_NAMES}")
        return self.splits.get(name, ())

    def split_entries(self, name: str) -> list[DatasetEntry]:
        return [self.entry(pid) for pid in self.split_ids(name)]

    def to_dict(self) -> dict:
        return {"id": self.id, "root": str(self.root),
                "entries": [e.to_dict() for e in self.entries],
                "splits": {k: list(v) for k, v in self.splits.items()},
                "notes": list(self.notes)}


@dataclass(frozen=True)
class DatasetStats:
    """Corpus summary: split sizes, mask coverage, caption shape."""
    n_pairs: dict[str, int]
    coverage_mean: float
    coverage_max: float
    coverage_histogram: tuple[int, ...]
    caption_length_mean: float
    caption_length_histogram: dict[int, int]
    vocabulary_size: int

    def to_dict(self) -> dict:
        return {"n_pairs": dict(self.n_pairs),
                "coverage_mean": self.coverage_mean,
                "coverage_max": self.coverage_max,
                "coverage_histogram": list(self.coverage_histogram),
                "caption_length_mean": self.caption_length_mean,
                "caption_length_histogram": dict(sorted(
                    self.caption_length_histogram.items())),
                "vocabulary_size": self.vocabulary_size}


# --- manifest I/O -----------------------------------------------------------------

def _require(mapping: dict, key: str, kind: type, where: str):
    if key not in mapping:
        raise SchemaError(f"{where}: missing required key {key!r}")
    value = mapping[key]
    if not isinstance(value, kind):
        raise SchemaError(f"{where}: key {key!r} must be {kind.__name__}, "
                          f"got {type(value).__name__}")
    return value


def _parse_caption(raw: dict, pair_id: str) -> Caption:
    where = f"entry {pair_id!r} caption"
    text = _require(raw, "text", str, where)
    origin_raw = _require(raw, "origin", str, where)
    try:
        origin = CaptionOrigin(origin_raw)
    except ValueError:
        valid = ", ".join(o.value for o in CaptionOrigin)
        raise SchemaError(f"{where}: unknown origin {origin_raw!r} "
                          f"(expected one of: {valid})") from None
    tokens = normalize_tokens(text)
    if not tokens:
        raise SchemaError(f"{where}: text normalizes to zero tokens: {text!r}")
    return Caption(tokens=tuple(tokens), origin=origin)


def _parse_entry(raw: dict, root: Path, index: int) -> DatasetEntry:
    where = f"entries[{index}]"
    pair_id = _require(raw, "pair_id", str, where)
    captions_raw = _require(raw, "captions", list, f"entry {pair_id!r}")
    captions = tuple(_parse_caption(c, pair_id) for c in captions_raw)
    return DatasetEntry(
        pair_id=pair_id,
        a=_require(raw, "a", str, where),
        b=_require(raw, "b", str, where),
        mask=_require(raw, "mask", str, where),
        captions=CaptionSet(pair_id=pair_id, captions=captions),
        root=root,
    )


def parse_manifest(doc: dict, base_dir: Path, *,
                   root_override: str | Path | None = None) -> Dataset:
    if not isinstance(doc, dict):
        raise SchemaError("manifest must be a JSON object")
    ds_id = _require(doc, "id", str, "manifest")
    root_raw = _require(doc, "root", str, "manifest")
    if root_override is not None:
        root = Path(root_override)
    else:
        root = Path(root_raw)
        if not root.is_absolute():
            root = base_dir / root
    entries_raw = _require(doc, "entries", list, "manifest")
    splits_raw = _require(doc, "splits", dict, "manifest")

    entries = tuple(_parse_entry(e, root, i) for i, e in enumerate(entries_raw))
    seen: set[str] = set()
    for e in entries:
        if e.pair_id in seen:
            raise DuplicateId(f"duplicate pair_id {e.pair_id!r}")
        seen.add(e.pair_id)

    splits: dict[str, tuple[str, ...]] = {}
    assigned: dict[str, str] = {}
    for name in splits_raw:
        if name not in SPLIT_NAMES:
            raise SchemaError(f"manifest: unknown split {name!r}; "
                              f"expected one of {SPLIT_NAMES}")
    for name in SPLIT_NAMES:
        ids = splits_raw.get(name, [])
        if not isinstance(ids, list):
            raise SchemaError(f"manifest: split {name!r} must be a list")
        for pid in ids:
            if pid not in seen:
                raise DanglingSplitRef(
                    f"split {name!r} references unknown pair_id {pid!r}")
            if pid in assigned:
                raise DuplicateId(
                    f"pair_id {pid!r} assigned to both "
                    f"{assigned[pid]!r} and {name!r}")
            assigned[pid] = name
        splits[name] = tuple(ids)

    notes = doc.get("notes", [])
    if not isinstance(notes, list) or not all(isinstance(n, str) for n in notes):
        raise SchemaError("manifest: notes must be a list of strings")
    return Dataset(id=ds_id, root=root, entries=entries, splits=splits,
                   notes=tuple(notes))


def load_manifest(path: str | Path, *,
                  root_override: str | Path | None = None) -> Dataset:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"manifest {path} is not valid JSON: {exc}") from None
    return parse_manifest(doc, path.parent, root_override=root_override)


def save_manifest(dataset: Dataset, path: str | Path) -> None:
    Path(path).write_text(json.dumps(dataset.to_dict(), indent=2) + "\n")


def builtin_manifest_path() -> Path:
    from importlib import resources
    return Path(str(resources.files("forestlab").joinpath(
        "assets/forest_change_manifest.json")))


def load_builtin_manifest(root_override: str | Path | None = None) -> Dataset:
    """The shipped forest-change manifest: 334 pairs split 270/31/33."""
    return load_manifest(builtin_manifest_path(), root_override=root_override)


# --- subsetting -------------------------------------------------------------------

def _normalized_keywords(keywords) -> frozenset[str]:
    if not keywords:
        raise EmptyKeywords("keyword set is empty")
    normalized = set()
    for kw in keywords:
        normalized.update(normalize_tokens(kw))
    if not normalized:
        raise EmptyKeywords("keyword set normalizes to zero tokens")
    return frozenset(normalized)


def _mentions_any(entry: DatasetEntry, keywords: frozenset[str]) -> bool:
    return any(not keywords.isdisjoint(c.tokens) for c in entry.captions.captions)


def filter_tree_subset(dataset: Dataset, keywords=DEFAULT_TREE_KEYWORDS) -> Dataset:
    """Keep entries with at least one caption containing a keyword as a whole
    token (case-insensitive); splits shrink to the surviving ids.
    """
    kws = _normalized_keywords(keywords)
    kept = tuple(e for e in dataset.entries if _mentions_any(e, kws))
    kept_ids = {e.pair_id for e in kept}
    splits = {name: tuple(pid for pid in ids if pid in kept_ids)
              for name, ids in dataset.splits.items()}
    note = f"keyword subset: {' '.join(sorted(kws))}"
    return replace(dataset, entries=kept, splits=splits,
                   notes=dataset.notes + (note,))


def build_levir_trees_manifest(source: Dataset | str | Path,
                               keywords=DEFAULT_TREE_KEYWORDS) -> Dataset:
    """Derive the tree-focused subset of a LEVIR-MCI-style dataset.

    Masks stay multi-class in the manifest; they are binarized when loaded
    for analysis or evaluation.
    """
    dataset = source if isinstance(source, Dataset) else load_manifest(source)
    subset = filter_tree_subset(dataset, keywords)
    counts = {name: len(subset.split_ids(name)) for name in SPLIT_NAMES}
    note = (f"split sizes: train={counts['train']} val={counts['val']} "
            f"test={counts['test']}")
    return replace(subset, id=f"{dataset.id}-trees",
                   notes=subset.notes + (note,))


# --- statistics -------------------------------------------------------------------

def entry_stats(entry: DatasetEntry) -> MaskStats:
    """Mask statistics for one entry (binarized load)."""
    try:
        mask = entry.load_mask(binarize=True)
    except FileNotFoundError as exc:
        raise FileNotFoundError(f"pair {entry.pair_id!r}: {exc}") from None
    return compute_stats(mask)


def corpus_statistics(dataset: Dataset) -> DatasetStats:
    """Coverage and caption statistics over every entry, in entry order."""
    n_pairs = {name: len(dataset.split_ids(name)) for name in SPLIT_NAMES}
    n_pairs["total"] = len(dataset.entries)

    n_bins = int(round(100.0 / COVERAGE_BIN_WIDTH))
    hist = [0] * n_bins
    coverages = []
    for entry in dataset.entries:
        cov = entry_stats(entry).change_percent
        coverages.append(cov)
        idx = min(int(cov / COVERAGE_BIN_WIDTH), n_bins - 1)
        hist[idx] += 1

    lengths: list[int] = []
    vocabulary: set[str] = set()
    length_hist: dict[int, int] = {}
    for entry in dataset.entries:
        for cap in entry.captions.captions:
            lengths.append(len(cap.tokens))
            vocabulary.update(cap.tokens)
            length_hist[len(cap.tokens)] = length_hist.get(len(cap.tokens), 0) + 1

    return DatasetStats(
        n_pairs=n_pairs,
        coverage_mean=sum(coverages) / len(coverages) if coverages else 0.0,
        coverage_max=max(coverages) if coverages else 0.0,
        coverage_histogram=tuple(hist),
        caption_length_mean=sum(lengths) / len(lengths) if lengths else 0.0,
        caption_length_histogram=length_hist,
        vocabulary_size=len(vocabulary),
    )


# --- ingestion helpers ---------------------------------------------------------------

def convert_levir_captions(captions_json: str | Path, root: str | Path,
                           dataset_id: str = "levir-mci") -> Dataset:
    """Ingest the LEVIR-CC-style caption file: {"images": [{filename, split,
    sentences: [{tokens | raw}]}]} with imagery under A/, B/, label/.
    """
    path = Path(captions_json)
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"caption file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("images"), list):
        raise SchemaError("caption file must be an object with an 'images' list")

    root = Path(root)
    split_alias = {"train": "train", "val": "val", "validation": "val",
                   "test": "test"}
    entries: list[DatasetEntry] = []
    splits: dict[str, list[str]] = {name: [] for name in SPLIT_NAMES}
    seen: set[str] = set()
    for i, img in enumerate(doc["images"]):
        where = f"images[{i}]"
        filename = _require(img, "filename", str, where)
        split_raw = _require(img, "split", str, where)
        split = split_alias.get(split_raw.lower())
        if split is None:
            raise SchemaError(f"{where}: unknown split {split_raw!r}")
        pair_id = Path(filename).stem
        if pair_id in seen:
            raise DuplicateId(f"duplicate filename stem {pair_id!r}")
        seen.add(pair_id)

        captions = []
        for sent in _require(img, "sentences", list, where):
            if isinstance(sent, dict) and isinstance(sent.get("tokens"), list):
                tokens = normalize_tokens(" ".join(str(t) for t in sent["tokens"]))
            elif isinstance(sent, dict) and isinstance(sent.get("raw"), str):
                tokens = normalize_tokens(sent["raw"])
            else:
                raise SchemaError(f"{where}: sentence needs 'tokens' or 'raw'")
            if tokens:
                captions.append(Caption(tokens=tuple(tokens),
                                        origin=CaptionOrigin.HUMAN))
        entries.append(DatasetEntry(
            pair_id=pair_id, a=f"A/{filename}", b=f"B/{filename}",
            mask=f"label/{filename}",
            captions=CaptionSet(pair_id=pair_id, captions=tuple(captions)),
            root=root))
        splits[split].append(pair_id)

    return Dataset(id=dataset_id, root=root, entries=tuple(entries),
                   splits={k: tuple(v) for k, v in splits.items()},
                   notes=(f"converted from {path.name}",))


def discover_dataset(root: str | Path, dataset_id: str = "discovered") -> Dataset:
    """Build a caption-less dataset from the conventional A/ B/ label/ layout.

    Every discovered pair lands in the test split, ready for evaluation.
    """
    root = Path(root)
    a_dir, b_dir, label_dir = root / "A", root / "B", root / "label"
    for d in (a_dir, b_dir, label_dir):
        if not d.is_dir():
            raise SchemaError(f"expected directory {d} for auto-discovery")
    entries = []
    ids = []
    for a_path in sorted(a_dir.iterdir()):
        if a_path.suffix.lower() not in {".png", ".jpg", ".jpeg", ".tif", ".tiff"}:
            continue
        name = a_path.name
        if not (b_dir / name).exists() or not (label_dir / name).exists():
            continue
        pair_id = a_path.stem
        entries.append(DatasetEntry(
            pair_id=pair_id, a=f"A/{name}", b=f"B/{name}", mask=f"label/{name}",
            captions=CaptionSet(pair_id=pair_id, captions=()), root=root))
        ids.append(pair_id)
    return Dataset(id=dataset_id, root=root, entries=tuple(entries),
                   splits={"train": (), "val": (), "test": tuple(ids)},
                   notes=("auto-discovered A/ B/ label/ layout; "
                          "all pairs assigned to test",))
