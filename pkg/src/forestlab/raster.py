"""Bi-temporal rasters and change masks: load, resize, binarize, render.

All types are immutable after construction (backing numpy arrays are marked
read-only), so instances can be shared freely across parallel workers.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, DimensionMismatch, InvalidTarget, NonBinaryMask

# Overlay color scheme: yellow = agreement (TP), red = false positive,
# green = false negative. Unchanged-background pixels keep the base image
# dimmed by TN_DIM_FACTOR.
TP_COLOR = (255, 255, 0)
FP_COLOR = (255, 0, 0)
FN_COLOR = (0, 200, 0)
TN_DIM_FACTOR = 0.5


class Provenance(Enum):
    GROUND_TRUTH = "ground_truth"
    PREDICTED = "predicted"
    DERIVED = "derived"


class ClassDomain(Enum):
    BINARY = "binary"
    MULTI_CLASS = "multi_class"


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Raster:
    """An 8-bit image with 1 or 3 channels, stored as (height, width, channels)."""

    width: int
    height: int
    channels: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("raster dimensions must be >= 1")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        if self.data.dtype != np.uint8:
            raise ValueError("raster data must be uint8")
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"data shape {self.data.shape} does not match "
                f"(h={self.height}, w={self.width}, c={self.channels})"
            )
        object.__setattr__(self, "data", _freeze(self.data))

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Raster":
        arr = np.asarray(arr, dtype=np.uint8)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2-D or 3-D array, got shape {arr.shape}")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.height, self.width, self.channels)


@dataclass(frozen=True)
class ImagePair:
    """Two co-registered rasters of the same scene at different times."""

    id: str
    epoch_a: Raster
    epoch_b: Raster
    resolution_m_per_px: float | None = None
    interval_note: str | None = None

    def __post_init__(self):
        a, b = self.epoch_a, self.epoch_b
        if (a.width, a.height, a.channels) != (b.width, b.height, b.channels):
            raise DimensionMismatch(a.shape, b.shape, context=f"pair {self.id!r}")

    @property
    def width(self) -> int:
        return self.epoch_a.width

    @property
    def height(self) -> int:
        return self.epoch_a.height


@dataclass(frozen=True)
class ChangeMask:
    """Per-pixel class grid; binary masks hold 0 = no change, 1 = change."""

    width: int
    height: int
    labels: np.ndarray = field(repr=False)
    provenance: Provenance = Provenance.DERIVED
    class_domain: ClassDomain = ClassDomain.BINARY

    def __post_init__(self):
        if self.labels.shape != (self.height, self.width):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match "
                f"(h={self.height}, w={self.width})"
            )
        if self.class_domain is ClassDomain.BINARY:
            vals = np.unique(self.labels)
            if not np.all(np.isin(vals, (0, 1))):
                raise NonBinaryMask(f"binary mask holds values {vals.tolist()}")
        object.__setattr__(self, "labels", _freeze(self.labels))

    @classmethod
    def from_array(cls, arr: np.ndarray, provenance=Provenance.DERIVED,
                   class_domain=ClassDomain.BINARY) -> "ChangeMask":
        arr = np.asarray(arr)
        h, w = arr.shape
        return cls(width=w, height=h, labels=arr.astype(np.int32),
                   provenance=provenance, class_domain=class_domain)

    @property
    def is_binary(self) -> bool:
        return self.class_domain is ClassDomain.BINARY

    def require_binary(self, op: str) -> None:
        if not self.is_binary:
            raise NonBinaryMask(f"{op} requires a binary mask")


# --- I/O ----------------------------------------------------------------------

def decode_raster(payload: bytes, source: str = "<bytes>") -> Raster:
    """Decode PNG/JPEG bytes into a Raster (grayscale stays 1-channel)."""
    try:
        img = Image.open(io.BytesIO(payload))
        img.load()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"cannot decode image {source}: {exc}") from exc
    if img.mode == "P":
        # palette indices are the labels in common mask encodings
        return Raster.from_array(np.asarray(img))
    if img.mode not in ("L", "RGB"):
        img = img.convert("L" if img.mode in ("1", "I", "I;16") else "RGB")
    return Raster.from_array(np.asarray(img))


def load_raster(path: str | Path) -> Raster:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc}") from exc
    return decode_raster(payload, source=str(path))


def save_raster(r: Raster, path: str | Path) -> None:
    arr = r.data[:, :, 0] if r.channels == 1 else r.data
    Image.fromarray(arr).save(Path(path))


def load_image_pair(path_a: str | Path, path_b: str | Path,
                    pair_id: str | None = None) -> ImagePair:
    """Load two co-registered rasters; dimensions must match exactly."""
    a = load_raster(path_a)
    b = load_raster(path_b)
    if (a.width, a.height, a.channels) != (b.width, b.height, b.channels):
        raise DimensionMismatch(a.shape, b.shape,
                                context=f"{Path(path_a).name} vs {Path(path_b).name}")
    if pair_id is None:
        pair_id = Path(path_a).stem
    return ImagePair(id=pair_id, epoch_a=a, epoch_b=b)


def decode_mask(payload: bytes, provenance=Provenance.GROUND_TRUTH,
                source: str = "<bytes>") -> ChangeMask:
    """Decode a single-channel mask file.

    Files whose value set is a subset of {0, 255} or {0, 1} are read as binary;
    any other value set is treated as multi-class labels kept verbatim.
    """
    r = decode_raster(payload, source=source)
    arr = r.data[:, :, 0] if r.channels == 1 else r.data.max(axis=2)
    vals = set(np.unique(arr).tolist())
    if vals <= {0, 255}:
        return ChangeMask.from_array((arr > 0).astype(np.int32), provenance,
                                     ClassDomain.BINARY)
    if vals <= {0, 1}:
        return ChangeMask.from_array(arr.astype(np.int32), provenance,
                                     ClassDomain.BINARY)
    return ChangeMask.from_array(arr.astype(np.int32), provenance,
                                 ClassDomain.MULTI_CLASS)


def load_mask(path: str | Path, provenance=Provenance.GROUND_TRUTH) -> ChangeMask:
    path = Path(path)
    try:
        payload = path.read_bytes()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise DecodeError(f"cannot read {path}: {exc}") from exc
    return decode_mask(payload, provenance, source=str(path))


def save_mask(m: ChangeMask, path: str | Path) -> None:
    if m.is_binary:
        arr = (m.labels * 255).astype(np.uint8)
    else:
        arr = m.labels.astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path))


def mask_to_png_bytes(m: ChangeMask) -> bytes:
    arr = (m.labels * 255).astype(np.uint8) if m.is_binary else m.labels.astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def raster_to_png_bytes(r: Raster) -> bytes:
    arr = r.data[:, :, 0] if r.channels == 1 else r.data
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


# --- geometry ----------------------------------------------------------------

def resize_bilinear(r: Raster, target_w: int, target_h: int) -> Raster:
    """Bilinear resize with edge-aligned sample centers.

    Destination sample (i, j) reads the source at
    ((i + 0.5) * src / dst - 0.5) per axis, clamped to the source grid, and
    the interpolated value is rounded half-up to 8 bits. Resizing to the
    source dimensions is a bitwise identity.
    """
    if target_w < 1 or target_h < 1:
        raise InvalidTarget(f"target dimensions must be >= 1, got {target_w}x{target_h}")
    if (target_w, target_h) == (r.width, r.height):
        return r

    src = r.data.astype(np.float64)
    xs = np.clip((np.arange(target_w) + 0.5) * (r.width / target_w) - 0.5, 0, r.width - 1)
    ys = np.clip((np.arange(target_h) + 0.5) * (r.height / target_h) - 0.5, 0, r.height - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, r.width - 1)
    y1 = np.minimum(y0 + 1, r.height - 1)
    fx = (xs - x0)[None, :, None]
    fy = (ys - y0)[:, None, None]

    top = src[y0[:, None], x0[None, :]] * (1 - fx) + src[y0[:, None], x1[None, :]] * fx
    bot = src[y1[:, None], x0[None, :]] * (1 - fx) + src[y1[:, None], x1[None, :]] * fx
    out = top * (1 - fy) + bot * fy
    out = np.floor(out + 0.5)  # round half up
    return Raster.from_array(np.clip(out, 0, 255).astype(np.uint8))


def resize_mask_nearest(m: ChangeMask, target_w: int, target_h: int) -> ChangeMask:
    """Nearest-neighbor resize for label grids (interpolating labels is meaningless)."""
    if target_w < 1 or target_h < 1:
        raise InvalidTarget(f"target dimensions must be >= 1, got {target_w}x{target_h}")
    if (target_w, target_h) == (m.width, m.height):
        return m
    xs = np.clip(np.floor((np.arange(target_w) + 0.5) * (m.width / target_w)), 0,
                 m.width - 1).astype(np.intp)
    ys = np.clip(np.floor((np.arange(target_h) + 0.5) * (m.height / target_h)), 0,
                 m.height - 1).astype(np.intp)
    out = m.labels[ys[:, None], xs[None, :]]
    return ChangeMask.from_array(out, m.provenance, m.class_domain)


def binarize_mask(m: ChangeMask) -> ChangeMask:
    """Collapse labels to change (label > 0) vs no-change (label = 0)."""
    out = (m.labels > 0).astype(np.int32)
    return ChangeMask.from_array(out, m.provenance, ClassDomain.BINARY)


def render_comparison_overlay(gt: ChangeMask, pred: ChangeMask, base: Raster) -> Raster:
    """Paint agreement/disagreement over a dimmed base image.

    TP pixels turn yellow, FP red, FN green; TN pixels keep the base value
    scaled by TN_DIM_FACTOR (rounded half up).
    """
    gt.require_binary("render_comparison_overlay")
    pred.require_binary("render_comparison_overlay")
    if (gt.width, gt.height) != (pred.width, pred.height):
        raise DimensionMismatch((gt.height, gt.width), (pred.height, pred.width),
                                context="gt vs pred")
    if (gt.width, gt.height) != (base.width, base.height):
        raise DimensionMismatch((gt.height, gt.width), (base.height, base.width),
                                context="mask vs base")

    if base.channels == 1:
        base_rgb = np.repeat(base.data, 3, axis=2)
    else:
        base_rgb = base.data
    dimmed = ((base_rgb.astype(np.uint16) + 1) // 2).astype(np.uint8)  # round(v * 0.5)

    g = gt.labels.astype(bool)
    p = pred.labels.astype(bool)
    out = dimmed.copy()
    out[g & p] = TP_COLOR
    out[~g & p] = FP_COLOR
    out[g & ~p] = FN_COLOR
    return Raster.from_array(out)
