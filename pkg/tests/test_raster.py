"""Raster and mask primitives: decode/encode, pairing, resizing, overlays."""

import io

import numpy as np
import pytest
from PIL import Image

from forestlab.errors import (DecodeError, DimensionMismatch, InvalidTarget,
                              NonBinaryMask)
from forestlab.raster import (ChangeMask, ClassDomain, ImagePair, Provenance,
                              Raster, binarize_mask, decode_mask,
                              decode_raster, load_image_pair, load_mask,
                              load_raster, mask_to_png_bytes,
                              raster_to_png_bytes, render_comparison_overlay,
                              resize_bilinear, resize_mask_nearest, save_mask,
                              save_raster)

# Output of a 2x2 -> 4x4 bilinear resize of [[0,100],[200,255]] under
# edge-aligned sample centers with round-half-up, checked by hand.
BILINEAR_2X2_TO_4X4 = [
    [0, 25, 75, 100],
    [50, 72, 117, 139],
    [150, 167, 200, 216],
    [200, 214, 241, 255],
]


def png_bytes(array, mode=None):
    img = Image.fromarray(array) if mode is None else Image.fromarray(array, mode)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


# --- decoding ---------------------------------------------------------------------


def test_decode_raster_rgb_roundtrip():
    arr = np.arange(48, dtype=np.uint8).reshape(4, 4, 3)
    r = decode_raster(png_bytes(arr))
    assert (r.width, r.height, r.channels) == (4, 4, 3)
    assert np.array_equal(r.data, arr)


def test_decode_raster_grayscale_stays_single_channel():
    arr = np.arange(16, dtype=np.uint8).reshape(4, 4)
    r = decode_raster(png_bytes(arr))
    assert r.channels == 1
    assert np.array_equal(r.data[:, :, 0], arr)


def test_decode_raster_rejects_garbage():
    with pytest.raises(DecodeError):
        decode_raster(b"not an image at all")


def test_decode_mask_255_binarizes():
    arr = np.array([[0, 255], [255, 0]], dtype=np.uint8)
    m = decode_mask(png_bytes(arr))
    assert m.class_domain is ClassDomain.BINARY
    assert m.labels.tolist() == [[0, 1], [1, 0]]


def test_decode_mask_zero_one_binary():
    arr = np.array([[0, 1], [1, 0]], dtype=np.uint8)
    m = decode_mask(png_bytes(arr))
    assert m.class_domain is ClassDomain.BINARY
    assert m.labels.tolist() == [[0, 1], [1, 0]]


def test_decode_mask_multiclass_keeps_labels():
    arr = np.array([[0, 1], [2, 2]], dtype=np.uint8)
    m = decode_mask(png_bytes(arr))
    assert m.class_domain is ClassDomain.MULTI_CLASS
    assert m.labels.tolist() == [[0, 1], [2, 2]]


def test_decode_mask_palette_values_are_indices():
    arr = np.array([[0, 1], [2, 0]], dtype=np.uint8)
    img = Image.fromarray(arr, mode="P")
    img.putpalette([0, 0, 0, 255, 0, 0, 0, 0, 255] + [0] * (256 * 3 - 9))
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    m = decode_mask(buf.getvalue())
    assert m.labels.tolist() == [[0, 1], [2, 0]]


def test_binarize_mask_collapses_multiclass():
    arr = np.array([[0, 1], [2, 3]], dtype=np.uint8)
    m = binarize_mask(decode_mask(png_bytes(arr)))
    assert m.class_domain is ClassDomain.BINARY
    assert m.labels.tolist() == [[0, 1], [1, 1]]


# --- file I/O ----------------------------------------------------------------------


def test_raster_save_load_roundtrip(tmp_path):
    arr = np.random.default_rng(3).integers(0, 256, (8, 6, 3), dtype=np.uint8)
    r = Raster.from_array(arr)
    save_raster(r, tmp_path / "img.png")
    back = load_raster(tmp_path / "img.png")
    assert np.array_equal(back.data, arr)


def test_mask_save_load_roundtrip_binary(tmp_path):
    labels = np.random.default_rng(4).integers(0, 2, (9, 7), dtype=np.int32)
    m = ChangeMask.from_array(labels, class_domain=ClassDomain.BINARY)
    save_mask(m, tmp_path / "m.png")
    back = load_mask(tmp_path / "m.png")
    assert back.class_domain is ClassDomain.BINARY
    assert np.array_equal(back.labels, labels)
    raw = np.asarray(Image.open(tmp_path / "m.png"))
    assert set(np.unique(raw)) <= {0, 255}


def test_png_bytes_helpers_decode_back(synthetic_pair):
    pair, gt = synthetic_pair
    r = decode_raster(raster_to_png_bytes(pair.epoch_a))
    assert np.array_equal(r.data, pair.epoch_a.data)
    m = decode_mask(mask_to_png_bytes(gt))
    assert np.array_equal(m.labels, gt.labels)


def test_load_image_pair_checks_dimensions(tmp_path):
    a = Raster.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
    b = Raster.from_array(np.zeros((4, 5, 3), dtype=np.uint8))
    save_raster(a, tmp_path / "a.png")
    save_raster(b, tmp_path / "b.png")
    with pytest.raises(DimensionMismatch):
        load_image_pair(tmp_path / "a.png", tmp_path / "b.png")


def test_image_pair_id_from_filename(tmp_path):
    a = Raster.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
    save_raster(a, tmp_path / "scene42.png")
    save_raster(a, tmp_path / "scene42_b.png")
    pair = load_image_pair(tmp_path / "scene42.png", tmp_path / "scene42_b.png")
    assert pair.id == "scene42"


# --- type invariants -----------------------------------------------------------------


def test_raster_arrays_are_immutable():
    r = Raster.from_array(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        r.data[0, 0, 0] = 1


def test_image_pair_requires_equal_shapes():
    a = Raster.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
    b = Raster.from_array(np.zeros((5, 4, 3), dtype=np.uint8))
    with pytest.raises(DimensionMismatch):
        ImagePair(id="x", epoch_a=a, epoch_b=b)


def test_require_binary_raises_on_multiclass():
    m = ChangeMask.from_array(np.array([[0, 2]], dtype=np.int32),
                              class_domain=ClassDomain.MULTI_CLASS)
    with pytest.raises(NonBinaryMask):
        m.require_binary("stats")


def test_mask_provenance_values():
    m = ChangeMask.from_array(np.zeros((2, 2), dtype=np.int32),
                              provenance=Provenance.PREDICTED)
    assert m.provenance.value == "predicted"


# --- resizing ----------------------------------------------------------------------


def test_bilinear_matches_hand_checked_matrix():
    src = Raster.from_array(
        np.array([[0, 100], [200, 255]], dtype=np.uint8)[:, :, None])
    out = resize_bilinear(src, 4, 4)
    assert out.data[:, :, 0].tolist() == BILINEAR_2X2_TO_4X4


def test_bilinear_identity_is_bitwise():
    arr = np.random.default_rng(5).integers(0, 256, (16, 12, 3), dtype=np.uint8)
    r = Raster.from_array(arr)
    out = resize_bilinear(r, 12, 16)
    assert out is r


def test_bilinear_480_to_256_shape_and_range():
    arr = np.random.default_rng(6).integers(0, 256, (480, 480, 3),
                                            dtype=np.uint8)
    out = resize_bilinear(Raster.from_array(arr), 256, 256)
    assert (out.width, out.height) == (256, 256)
    assert out.data.dtype == np.uint8


def test_bilinear_constant_image_stays_constant():
    arr = np.full((10, 10, 3), 77, dtype=np.uint8)
    out = resize_bilinear(Raster.from_array(arr), 256, 256)
    assert np.all(out.data == 77)


def test_bilinear_corners_preserved_on_upscale():
    src = np.array([[10, 20], [30, 40]], dtype=np.uint8)[:, :, None]
    out = resize_bilinear(Raster.from_array(src), 8, 8).data[:, :, 0]
    assert out[0, 0] == 10 and out[0, -1] == 20
    assert out[-1, 0] == 30 and out[-1, -1] == 40


def test_bilinear_rejects_bad_target():
    r = Raster.from_array(np.zeros((4, 4, 3), dtype=np.uint8))
    with pytest.raises(InvalidTarget):
        resize_bilinear(r, 0, 4)


def test_nearest_mask_resize_preserves_label_set():
    labels = np.random.default_rng(7).integers(0, 4, (31, 17), dtype=np.int32)
    m = ChangeMask.from_array(labels, class_domain=ClassDomain.MULTI_CLASS)
    out = resize_mask_nearest(m, 64, 64)
    assert set(np.unique(out.labels)) <= set(np.unique(labels))
    assert (out.width, out.height) == (64, 64)


def test_nearest_mask_identity():
    m = ChangeMask.from_array(np.eye(5, dtype=np.int32))
    assert resize_mask_nearest(m, 5, 5) is m


def test_nearest_downscale_2x_picks_block_pixel():
    # 4x4 -> 2x2 with centers at source coords floor((i+0.5)*2) = {1, 3}
    labels = np.arange(16, dtype=np.int32).reshape(4, 4)
    m = ChangeMask.from_array(labels, class_domain=ClassDomain.MULTI_CLASS)
    out = resize_mask_nearest(m, 2, 2)
    assert out.labels.tolist() == [[5, 7], [13, 15]]


# --- overlay ----------------------------------------------------------------------


def test_overlay_colors_per_confusion_cell():
    gt = ChangeMask.from_array(np.array([[1, 1], [0, 0]], dtype=np.int32))
    pred = ChangeMask.from_array(np.array([[1, 0], [1, 0]], dtype=np.int32))
    base = Raster.from_array(np.full((2, 2, 3), 100, dtype=np.uint8))
    out = render_comparison_overlay(gt, pred, base).data
    assert out[0, 0].tolist() == [255, 255, 0]  # agreement on change
    assert out[0, 1].tolist() == [0, 200, 0]    # missed change
    assert out[1, 0].tolist() == [255, 0, 0]    # false alarm
    assert out[1, 1].tolist() == [50, 50, 50]   # dimmed background


def test_overlay_dims_grayscale_base():
    gt = ChangeMask.from_array(np.zeros((2, 2), dtype=np.int32))
    pred = ChangeMask.from_array(np.zeros((2, 2), dtype=np.int32))
    base = Raster.from_array(np.full((2, 2, 1), 101, dtype=np.uint8))
    out = render_comparison_overlay(gt, pred, base).data
    assert out.shape == (2, 2, 3)
    assert np.all(out == 51)  # (101 + 1) // 2, broadcast to rgb


def test_overlay_requires_matching_shapes():
    gt = ChangeMask.from_array(np.zeros((2, 2), dtype=np.int32))
    pred = ChangeMask.from_array(np.zeros((2, 3), dtype=np.int32))
    base = Raster.from_array(np.zeros((2, 2, 3), dtype=np.uint8))
    with pytest.raises(DimensionMismatch):
        render_comparison_overlay(gt, pred, base)


def test_overlay_requires_binary_masks():
    gt = ChangeMask.from_array(np.array([[0, 2]], dtype=np.int32),
                               class_domain=ClassDomain.MULTI_CLASS)
    pred = ChangeMask.from_array(np.array([[0, 1]], dtype=np.int32))
    base = Raster.from_array(np.zeros((1, 2, 3), dtype=np.uint8))
    with pytest.raises(NonBinaryMask):
        render_comparison_overlay(gt, pred, base)
