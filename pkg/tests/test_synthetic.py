"""Synthetic pair generator: determinism, ground-truth geometry, noise."""

import numpy as np
import pytest

from forestlab.analytics import compute_stats
from forestlab.raster import ClassDomain, Provenance
from forestlab.synthetic import FOREST_RGB, SOIL_RGB, make_loss_pair


def test_same_arguments_reproduce_identical_pairs():
    p1, m1 = make_loss_pair(noise_sigma=2.0, seed=3)
    p2, m2 = make_loss_pair(noise_sigma=2.0, seed=3)
    assert np.array_equal(p1.epoch_a.data, p2.epoch_a.data)
    assert np.array_equal(p1.epoch_b.data, p2.epoch_b.data)
    assert np.array_equal(m1.labels, m2.labels)


def test_different_seeds_differ():
    p1, _ = make_loss_pair(seed=1)
    p2, _ = make_loss_pair(seed=2)
    assert not np.array_equal(p1.epoch_a.data, p2.epoch_a.data)


def test_ground_truth_matches_planted_boxes():
    _, gt = make_loss_pair(size=128, boxes=((10, 20, 30),))
    expect = np.zeros((128, 128), dtype=np.int32)
    expect[10:40, 20:50] = 1
    assert np.array_equal(gt.labels, expect)
    assert gt.provenance is Provenance.GROUND_TRUTH
    assert gt.class_domain is ClassDomain.BINARY


def test_default_box_covers_about_ten_percent():
    _, gt = make_loss_pair()
    percent = compute_stats(gt).change_percent
    assert percent == pytest.approx(100.0 * 82 * 82 / 256 / 256)
    assert 10.0 < percent < 10.5


def test_epoch_a_untouched_inside_box_region_before_change():
    pair, gt = make_loss_pair(size=64, boxes=((8, 8, 16),))
    outside = gt.labels == 0
    assert np.array_equal(pair.epoch_a.data[outside],
                          pair.epoch_b.data[outside])


def test_changed_region_moves_toward_soil_color():
    pair, gt = make_loss_pair(size=64, boxes=((8, 8, 16),))
    inside = gt.labels == 1
    mean_b = pair.epoch_b.data[inside].mean(axis=0)
    mean_a = pair.epoch_a.data[inside].mean(axis=0)
    assert np.allclose(mean_b, SOIL_RGB, atol=4.0)
    assert np.allclose(mean_a, FOREST_RGB, atol=4.0)


def test_no_boxes_means_identical_epochs():
    pair, gt = make_loss_pair(boxes=())
    assert np.array_equal(pair.epoch_a.data, pair.epoch_b.data)
    assert int(gt.labels.sum()) == 0


def test_noise_perturbs_both_epochs():
    clean, _ = make_loss_pair(boxes=(), noise_sigma=0.0)
    noisy, _ = make_loss_pair(boxes=(), noise_sigma=5.0)
    assert not np.array_equal(clean.epoch_a.data, noisy.epoch_a.data)
    # noisy epochs differ from each other (independent noise draws)
    assert not np.array_equal(noisy.epoch_a.data, noisy.epoch_b.data)


def test_pair_id_passthrough():
    pair, _ = make_loss_pair(pair_id="demo42")
    assert pair.id == "demo42"


def test_output_dtype_and_range():
    pair, _ = make_loss_pair(noise_sigma=40.0, seed=9)
    for raster in (pair.epoch_a, pair.epoch_b):
        assert raster.data.dtype == np.uint8
        assert raster.channels == 3
