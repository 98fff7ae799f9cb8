"""Predicted change masks without a trained network.

A classical vegetation-loss detector (radiometric normalization, excess-green
index differencing, Otsu thresholding, morphological cleanup) plus a file
adapter that re-scores externally generated model predictions through the
identical evaluation path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .analytics import label_components
from .errors import (ChannelCountError, ConstantField, DimensionMismatch,
                     MissingPrediction)
from .raster import (ChangeMask, ClassDomain, ImagePair, Provenance, Raster,
                     binarize_mask, load_mask)

OTSU_BINS = 256


class Direction(Enum):
    LOSS = "loss"
    GAIN = "gain"
    BOTH = "both"


class MorphOp(Enum):
    ERODE = "erode"
    DILATE = "dilate"
    OPEN = "open"
    CLOSE = "close"


@dataclass(frozen=True)
class DetectionParams:
    kernel_radius: int = 1
    min_area_px: int = 16
    direction: Direction = Direction.LOSS

    def __post_init__(self):
        if self.kernel_radius < 0:
            raise ValueError("kernel_radius must be >= 0")
        if self.min_area_px < 0:
            raise ValueError("min_area_px must be >= 0")


@dataclass(frozen=True)
class ScalarField:
    width: int
    height: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.values.shape != (self.height, self.width):
            raise ValueError("values shape does not match dimensions")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("scalar field requires finite values")
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ScalarField":
        arr = np.asarray(arr, dtype=np.float64)
        h, w = arr.shape
        return cls(width=w, height=h, values=arr)


@dataclass(frozen=True)
class DetectionResult:
    """Predicted mask plus a warning when detection degraded to all-zero."""
    mask: ChangeMask
    threshold: float | None = None
    warning: str | None = None


def normalize_radiometry(pair: ImagePair) -> ImagePair:
    """Match epoch B's per-channel mean/std to epoch A's.

    Epoch A passes through untouched; zero-variance channels of B do too.
    Output samples are clipped to 8 bits and rounded half up.
    """
    a = pair.epoch_a.data.astype(np.float64)
    b = pair.epoch_b.data.astype(np.float64)
    out = b.copy()
    for c in range(pair.epoch_a.channels):
        mean_b, std_b = b[..., c].mean(), b[..., c].std()
        if std_b == 0.0:
            continue
        mean_a, std_a = a[..., c].mean(), a[..., c].std()
        gain = std_a / std_b
        if gain == 1.0 and mean_a == mean_b:
            continue
        out[..., c] = (b[..., c] - mean_b) * gain + mean_a
    out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return ImagePair(id=pair.id, epoch_a=pair.epoch_a,
                     epoch_b=Raster.from_array(out),
                     resolution_m_per_px=pair.resolution_m_per_px,
                     interval_note=pair.interval_note)


def excess_green(r: Raster) -> ScalarField:
    """Chromaticity-normalized vegetation index: 2g - r - b over channel sums.

    Black pixels (zero channel sum) map to 0. Invariant under uniform scaling
    of a pixel's channels.
    """
    if r.channels != 3:
        raise ChannelCountError(f"excess_green requires 3 channels, got {r.channels}")
    f = r.data.astype(np.float64)
    s = f.sum(axis=2)
    safe = np.where(s > 0, s, 1.0)
    rn, gn, bn = f[..., 0] / safe, f[..., 1] / safe, f[..., 2] / safe
    values = np.where(s > 0, 2.0 * gn - rn - bn, 0.0)
    return ScalarField.from_array(values)


def otsu_threshold(field: ScalarField, bins: int = OTSU_BINS) -> float:
    """Histogram threshold maximizing between-class variance.

    Candidate thresholds are the interior bin edges of a `bins`-bin histogram
    over [min, max]. The comparison runs in exact integer arithmetic (the
    argmax is invariant under the affine map from bin centers to bin indices),
    so ties break deterministically toward the lower threshold.
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    vals = field.values.ravel()
    if vals.size == 0:
        raise ValueError("field has no values")
    vmin, vmax = float(vals.min()), float(vals.max())
    if vmin == vmax:
        raise ConstantField(f"field is constant at {vmin}; no threshold exists")

    counts, edges = np.histogram(vals, bins=bins, range=(vmin, vmax))
    counts = [int(c) for c in counts]
    total = sum(counts)
    s_all = sum(c * i for i, c in enumerate(counts))

    best_k = None
    best_num, best_den = -1, 1
    n0 = s0 = 0
    for k in range(1, bins):
        n0 += counts[k - 1]
        s0 += counts[k - 1] * (k - 1)
        n1 = total - n0
        s1 = s_all - s0
        if n0 == 0 or n1 == 0:
            continue
        # between-class variance ~ (s0*n1 - s1*n0)^2 / (n0*n1); compare exactly
        num = (s0 * n1 - s1 * n0) ** 2
        den = n0 * n1
        if best_k is None or num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    assert best_k is not None  # vmin < vmax guarantees a two-class split
    return float(edges[best_k])


def _structuring_element(kernel_radius: int) -> np.ndarray:
    side = 2 * kernel_radius + 1
    return np.ones((side, side), dtype=bool)


def morph(m: ChangeMask, op: MorphOp, kernel_radius: int = 1) -> ChangeMask:
    """Binary morphology with a square structuring element of side 2r+1.

    Dilation treats out-of-bounds as background; erosion treats it as
    foreground so that Open(m) <= m <= Close(m) holds up to the image border.
    """
    m.require_binary("morph")
    if kernel_radius == 0:
        return m
    se = _structuring_element(kernel_radius)
    data = m.labels.astype(bool)

    def erode(x):
        return ndimage.binary_erosion(x, structure=se, border_value=1)

    def dilate(x):
        return ndimage.binary_dilation(x, structure=se, border_value=0)

    if op is MorphOp.ERODE:
        out = erode(data)
    elif op is MorphOp.DILATE:
        out = dilate(data)
    elif op is MorphOp.OPEN:
        out = dilate(erode(data))
    else:
        out = erode(dilate(data))
    return ChangeMask.from_array(out.astype(np.int32), m.provenance, m.class_domain)


def drop_small_components(m: ChangeMask, min_area_px: int) -> ChangeMask:
    """Remove 8-connected components smaller than min_area_px pixels."""
    if min_area_px <= 1:
        return m
    comp = label_components(m, connectivity=8)
    if comp.num_components == 0:
        return m
    keep = np.array([0] + [1 if a >= min_area_px else 0 for a in comp.areas],
                    dtype=np.int32)
    out = keep[comp.labels] * (comp.labels > 0)
    return ChangeMask.from_array(out.astype(np.int32), m.provenance, m.class_domain)


def detect_changes(pair: ImagePair, params: DetectionParams | None = None) -> DetectionResult:
    """Classical change detection: normalize, difference excess-green fields,
    Otsu-threshold, then clean up with open/close and a minimum patch area.

    When the difference field is constant (e.g. identical epochs) the result
    degrades to an all-zero mask carrying a warning instead of raising.
    """
    params = params or DetectionParams()
    if pair.epoch_a.channels != 3:
        raise ChannelCountError("detect_changes requires 3-channel imagery")

    normalized = normalize_radiometry(pair)
    d = excess_green(normalized.epoch_a).values - excess_green(normalized.epoch_b).values
    if params.direction is Direction.GAIN:
        d = -d
    elif params.direction is Direction.BOTH:
        d = np.abs(d)
    fld = ScalarField.from_array(d)

    try:
        threshold = otsu_threshold(fld)
    except ConstantField:
        zero = ChangeMask.from_array(np.zeros((pair.height, pair.width), np.int32),
                                     Provenance.PREDICTED, ClassDomain.BINARY)
        return DetectionResult(mask=zero, threshold=None,
                               warning="no change detected: difference field is constant")

    mask = ChangeMask.from_array((d >= threshold).astype(np.int32),
                                 Provenance.PREDICTED, ClassDomain.BINARY)
    mask = morph(mask, MorphOp.OPEN, params.kernel_radius)
    mask = morph(mask, MorphOp.CLOSE, params.kernel_radius)
    mask = drop_small_components(mask, params.min_area_px)
    return DetectionResult(mask=mask, threshold=threshold, warning=None)


def load_external_predictions(pred_dir: str | Path, dataset) -> dict[str, ChangeMask]:
    """Load one prediction mask per dataset entry from `<dir>/<pair_id>.png`.

    Masks are binarized on load and dimension-checked against the entry's
    ground-truth mask when that file is available.
    """
    pred_dir = Path(pred_dir)
    out: dict[str, ChangeMask] = {}
    for entry in dataset.entries:
        path = pred_dir / f"{entry.pair_id}.png"
        if not path.is_file():
            raise MissingPrediction(entry.pair_id)
        pred = binarize_mask(load_mask(path, provenance=Provenance.PREDICTED))
        gt_path = entry.resolved_mask_path()
        if gt_path is not None and gt_path.is_file():
            gt = load_mask(gt_path)
            if (gt.width, gt.height) != (pred.width, pred.height):
                raise DimensionMismatch((gt.height, gt.width),
                                        (pred.height, pred.width),
                                        context=f"prediction for {entry.pair_id}")
        out[entry.pair_id] = pred
    return out
