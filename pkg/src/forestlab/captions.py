"""Rule-based change captions generated from mask statistics.

Each pair gets four automatic captions, one per rule origin: overall extent,
patch structure, spatial location, and a one-line summary. Wording comes from
a plain-text template table so generated corpora are reproducible bit for bit.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path

from .analytics import MaskStats
from .errors import OutOfRange

_PUNCT = string.punctuation


class CaptionOrigin(Enum):
    HUMAN = "human"
    RULE_EXTENT = "rule_extent"
    RULE_PATCH = "rule_patch"
    RULE_LOCATION = "rule_location"
    RULE_SUMMARY = "rule_summary"


RULE_ORIGINS = (CaptionOrigin.RULE_EXTENT, CaptionOrigin.RULE_PATCH,
                CaptionOrigin.RULE_LOCATION, CaptionOrigin.RULE_SUMMARY)


@dataclass(frozen=True)
class Caption:
    tokens: tuple[str, ...]
    origin: CaptionOrigin

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("caption tokens must be nonempty")
        for t in self.tokens:
            if t != t.lower() or t.strip(_PUNCT) != t:
                raise ValueError(f"caption token {t!r} is not normalized")

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def to_dict(self) -> dict:
        return {"text": self.text, "origin": self.origin.value}


@dataclass(frozen=True)
class CaptionSet:
    pair_id: str
    captions: tuple[Caption, ...]

    def by_origin(self, origin: CaptionOrigin) -> list[Caption]:
        return [c for c in self.captions if c.origin is origin]

    def to_dict(self) -> dict:
        return {"pair_id": self.pair_id,
                "captions": [c.to_dict() for c in self.captions]}


# --- severity buckets ----------------------------------------------------------

@dataclass(frozen=True)
class SeverityLevel:
    """A half-open change-percentage interval (low, high]; "none" is exactly 0."""
    name: str
    low: float
    high: float


# Fixed partition of [0, 100]. Edges sit around the corpus regime where most
# masks carry under 5% change and the heaviest reach ~40%.
SEVERITY_LEVELS = (
    SeverityLevel("none", 0.0, 0.0),
    SeverityLevel("minimal", 0.0, 1.0),
    SeverityLevel("minor", 1.0, 5.0),
    SeverityLevel("moderate", 5.0, 15.0),
    SeverityLevel("major", 15.0, 40.0),
    SeverityLevel("severe", 40.0, 100.0),
)


def severity_bucket(change_percent: float) -> SeverityLevel:
    """Map a change percentage onto its severity bucket."""
    if not 0.0 <= change_percent <= 100.0:
        raise OutOfRange(f"change percent {change_percent} outside [0, 100]")
    if change_percent == 0.0:
        return SEVERITY_LEVELS[0]
    for level in SEVERITY_LEVELS[1:]:
        if level.low < change_percent <= level.high:
            return level
    raise AssertionError("severity partition must cover [0, 100]")  # pragma: no cover


def patchiness_word(num_patches: int) -> str:
    if num_patches <= 1:
        return "single"
    if num_patches <= 5:
        return "few"
    return "scattered"


# --- tokenization --------------------------------------------------------------

def normalize_tokens(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip edge punctuation per token.

    Numerals survive as single tokens ("6.2" keeps its interior dot); tokens
    that are pure punctuation vanish.
    """
    out = []
    for raw in text.lower().split():
        tok = raw.strip(_PUNCT)
        if tok:
            out.append(tok)
    return out


# --- template table --------------------------------------------------------------

_TEMPLATE_KEYS = ("extent", "extent_zero", "patch", "patch_zero",
                  "location", "location_zero", "summary", "summary_zero")


def parse_template_table(text: str) -> dict[str, str]:
    templates = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition(":")
        key = key.strip()
        if key not in _TEMPLATE_KEYS:
            raise ValueError(f"unknown template key {key!r}")
        templates[key] = value.strip()
    missing = [k for k in _TEMPLATE_KEYS if k not in templates]
    if missing:
        raise ValueError(f"template table missing keys: {missing}")
    return templates


def load_template_table(path: str | Path | None = None) -> dict[str, str]:
    """Load the template table; defaults to the packaged version-1 table."""
    if path is None:
        text = resources.files("forestlab").joinpath("assets/rule_templates.txt").read_text()
    else:
        text = Path(path).read_text()
    return parse_template_table(text)


_DEFAULT_TEMPLATES: dict[str, str] | None = None


def _default_templates() -> dict[str, str]:
    global _DEFAULT_TEMPLATES
    if _DEFAULT_TEMPLATES is None:
        _DEFAULT_TEMPLATES = load_template_table()
    return _DEFAULT_TEMPLATES


# --- generation ----------------------------------------------------------------

def _fmt1(value: float) -> str:
    return f"{value:.1f}"


def generate_rule_captions(stats: MaskStats, pair_id: str,
                           templates: dict[str, str] | None = None) -> CaptionSet:
    """Instantiate the four rule captions for one pair.

    Deterministic: identical stats produce token-identical captions. Numbers
    are rounded to one decimal before insertion.
    """
    tpl = templates if templates is not None else _default_templates()
    zero = stats.change_percent == 0.0
    fields = {
        "percent": _fmt1(stats.change_percent),
        "severity": severity_bucket(stats.change_percent).name,
        "n_patches": str(stats.num_patches),
        "patchiness": patchiness_word(stats.num_patches),
        "cell": " and ".join(stats.dominant_cells) if stats.dominant_cells else "scene",
        "largest_percent": _fmt1(stats.largest_patch_percent),
    }

    captions = []
    for origin, key in zip(RULE_ORIGINS, ("extent", "patch", "location", "summary")):
        template = tpl[key + "_zero"] if zero else tpl[key]
        text = template.format(**fields)
        captions.append(Caption(tokens=tuple(normalize_tokens(text)), origin=origin))
    return CaptionSet(pair_id=pair_id, captions=tuple(captions))
