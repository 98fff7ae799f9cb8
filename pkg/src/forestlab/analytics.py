"""Statistics over change masks: coverage, patch inventory, spatial spread,
and confusion counts for evaluation.

These numbers are the raw material of the rule-based captions: how much of
the scene changed, in how many patches, and where in a 3x3 compass grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch
from .raster import ChangeMask

GRID_CELLS = (
    "northwest", "north", "northeast",
    "west", "center", "east",
    "southwest", "south", "southeast",
)

# tolerance for reporting tied dominant cells
DOMINANCE_EPS = 1e-9

_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
_STRUCTURE_8 = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class ComponentLabeling:
    """Partition of changed pixels into connected components ("patches").

    Component ids run 1..num_components in raster-scan order of each
    component's first pixel; 0 marks background.
    """

    labels: np.ndarray
    num_components: int
    areas: tuple[int, ...]
    centroids: tuple[tuple[float, float], ...]
    bounding_boxes: tuple[tuple[int, int, int, int], ...]


@dataclass(frozen=True)
class MaskStats:
    change_percent: float
    num_patches: int
    largest_patch_percent: float
    largest_patch_cell: str | None
    mean_patch_area_px: float
    grid_fractions: tuple[tuple[float, float, float], ...]
    dominant_cells: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "change_percent": self.change_percent,
            "num_patches": self.num_patches,
            "largest_patch_percent": self.largest_patch_percent,
            "largest_patch_cell": self.largest_patch_cell,
            "mean_patch_area_px": self.mean_patch_area_px,
            "grid_fractions": [list(row) for row in self.grid_fractions],
            "dominant_cells": list(self.dominant_cells),
        }


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ConfusionCounts") -> "ConfusionCounts":
        return ConfusionCounts(self.tp + other.tp, self.fp + other.fp,
                               self.fn + other.fn, self.tn + other.tn)

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


def label_components(m: ChangeMask, connectivity: int = 8) -> ComponentLabeling:
    """Partition changed pixels into maximal connected sets.

    Labels are renumbered so component k is the k-th component encountered in
    raster-scan order, independent of the underlying labeling pass.
    """
    m.require_binary("label_components")
    if connectivity not in (4, 8):
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    structure = _STRUCTURE_4 if connectivity == 4 else _STRUCTURE_8

    raw, n = ndimage.label(m.labels, structure=structure)
    if n == 0:
        return ComponentLabeling(labels=np.zeros_like(m.labels), num_components=0,
                                 areas=(), centroids=(), bounding_boxes=())

    flat = raw.ravel()
    nonzero = np.flatnonzero(flat)
    # first raster-scan pixel of each raw label decides its final id
    first_idx = np.full(n + 1, flat.size, dtype=np.intp)
    np.minimum.at(first_idx, flat[nonzero], nonzero)
    order = np.argsort(first_idx[1:], kind="stable")  # raw label -> rank
    remap = np.zeros(n + 1, dtype=np.int32)
    remap[order + 1] = np.arange(1, n + 1)
    labels = remap[raw]

    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    rows, cols = np.nonzero(labels)
    ids = labels[rows, cols]
    r_sum = np.bincount(ids, weights=rows, minlength=n + 1)[1:]
    c_sum = np.bincount(ids, weights=cols, minlength=n + 1)[1:]
    centroids = tuple((r_sum[i] / areas[i], c_sum[i] / areas[i]) for i in range(n))

    boxes = []
    for i in range(1, n + 1):
        sel = ids == i
        rr, cc = rows[sel], cols[sel]
        boxes.append((int(rr.min()), int(cc.min()), int(rr.max()), int(cc.max())))

    return ComponentLabeling(labels=labels, num_components=int(n),
                             areas=tuple(int(a) for a in areas),
                             centroids=centroids, bounding_boxes=tuple(boxes))


def _grid_bands(size: int) -> list[slice]:
    # three equal bands; remainder rows/cols go to the last cell
    third = size // 3
    return [slice(0, third), slice(third, 2 * third), slice(2 * third, size)]


def grid_cell_of(row: float, col: float, height: int, width: int) -> str:
    """Compass name of the 3x3 grid cell containing a (row, col) point."""
    def band(v, size):
        third = size // 3
        if v < third:
            return 0
        if v < 2 * third:
            return 1
        return 2
    return GRID_CELLS[band(row, height) * 3 + band(col, width)]


def compute_stats(m: ChangeMask) -> MaskStats:
    """Derive the caption-driving statistics from a binary mask.

    change_percent uses the exact integer pixel ratio; patches use
    8-connectivity; the 3x3 grid partitions rows/cols into equal thirds with
    the remainder assigned to the last band.
    """
    m.require_binary("compute_stats")
    total = m.width * m.height
    changed = int(m.labels.sum())
    change_percent = 100.0 * changed / total

    comp = label_components(m, connectivity=8)
    if comp.num_components == 0:
        grid = tuple((0.0, 0.0, 0.0) for _ in range(3))
        return MaskStats(change_percent=change_percent, num_patches=0,
                         largest_patch_percent=0.0, largest_patch_cell=None,
                         mean_patch_area_px=0.0, grid_fractions=grid,
                         dominant_cells=())

    areas = np.asarray(comp.areas)
    largest = int(np.argmax(areas))  # ties -> lowest id, i.e. first in raster order
    largest_percent = 100.0 * int(areas[largest]) / total
    cy, cx = comp.centroids[largest]
    largest_cell = grid_cell_of(cy, cx, m.height, m.width)

    row_bands = _grid_bands(m.height)
    col_bands = _grid_bands(m.width)
    grid = np.zeros((3, 3), dtype=np.float64)
    for i, rb in enumerate(row_bands):
        for j, cb in enumerate(col_bands):
            grid[i, j] = int(m.labels[rb, cb].sum()) / changed

    peak = grid.max()
    dominant = tuple(GRID_CELLS[i * 3 + j]
                     for i in range(3) for j in range(3)
                     if peak - grid[i, j] <= DOMINANCE_EPS)

    return MaskStats(
        change_percent=change_percent,
        num_patches=comp.num_components,
        largest_patch_percent=largest_percent,
        largest_patch_cell=largest_cell,
        mean_patch_area_px=float(areas.mean()),
        grid_fractions=tuple(tuple(float(v) for v in row) for row in grid),
        dominant_cells=dominant,
    )


def compare_masks(gt: ChangeMask, pred: ChangeMask) -> ConfusionCounts:
    """Per-pixel confusion counts with change as the positive class."""
    gt.require_binary("compare_masks")
    pred.require_binary("compare_masks")
    if (gt.width, gt.height) != (pred.width, pred.height):
        raise DimensionMismatch((gt.height, gt.width), (pred.height, pred.width),
                                context="compare_masks")
    g = gt.labels.astype(bool)
    p = pred.labels.astype(bool)
    tp = int(np.count_nonzero(g & p))
    fp = int(np.count_nonzero(~g & p))
    fn = int(np.count_nonzero(g & ~p))
    tn = int(np.count_nonzero(~g & ~p))
    return ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn)
