"""Synthetic bi-temporal forest pairs with known ground truth.

Used for end-to-end tests, fixtures, and offline demos: epoch A is a textured
green canopy, epoch B replaces one or more rectangles with bare-soil color,
and the planted rectangles are returned as the ground-truth change mask.
"""

from __future__ import annotations

import numpy as np

from .raster import ChangeMask, ClassDomain, ImagePair, Provenance, Raster

FOREST_RGB = (52, 120, 48)
SOIL_RGB = (150, 108, 70)


def make_loss_pair(size: int = 256,
                   boxes: tuple[tuple[int, int, int], ...] = ((60, 90, 82),),
                   noise_sigma: float = 0.0,
                   seed: int = 7,
                   pair_id: str = "synthetic") -> tuple[ImagePair, ChangeMask]:
    """Build an (ImagePair, ground-truth mask) with planted loss rectangles.

    Each box is (top, left, side). Texture and noise come from a seeded
    generator, so identical arguments reproduce identical pairs.
    """
    rng = np.random.default_rng(seed)
    base = np.empty((size, size, 3), dtype=np.float64)
    base[..., 0], base[..., 1], base[..., 2] = FOREST_RGB
    texture = rng.normal(0.0, 12.0, size=(size, size, 1))
    a = np.clip(base + texture, 0, 255)

    b = a.copy()
    gt = np.zeros((size, size), dtype=np.int32)
    soil = np.array(SOIL_RGB, dtype=np.float64)
    for top, left, side in boxes:
        patch_tex = rng.normal(0.0, 8.0, size=(side, side, 1))
        b[top:top + side, left:left + side] = np.clip(soil + patch_tex, 0, 255)
        gt[top:top + side, left:left + side] = 1

    if noise_sigma > 0:
        a = a + rng.normal(0.0, noise_sigma, a.shape)
        b = b + rng.normal(0.0, noise_sigma, b.shape)

    def to_raster(arr):
        return Raster.from_array(np.clip(np.floor(arr + 0.5), 0, 255).astype(np.uint8))

    pair = ImagePair(id=pair_id, epoch_a=to_raster(a), epoch_b=to_raster(b))
    mask = ChangeMask.from_array(gt, Provenance.GROUND_TRUTH, ClassDomain.BINARY)
    return pair, mask
