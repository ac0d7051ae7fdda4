import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from kbench.metrics import dice_per_class
from kbench.operator import ForwardOperator, zero_filled
from kbench.phantom import CLASSES, LEVELS
from kbench.sampling import apply_mask, poisson_mask
from kbench.segment import (SegmentationMap, bands_from_levels, load_segmentation,
                            normalize_intensity, save_segmentation, threshold_segment)

BANDS = [(1, 0.5, 1.5), (2, 0.1, 0.25), (3, 0.25, 0.4)]


def test_exact_bands_give_perfect_dice(case64):
    bands = [(k, v - 0.01, v + 0.01) for k, v in LEVELS.items()]
    seg = threshold_segment(case64.gt_image, bands, CLASSES)
    assert all(d == 1.0 for d in dice_per_class(seg, case64.gt_seg).values())
    seg = threshold_segment(case64.gt_image, bands_from_levels(LEVELS), CLASSES)
    assert np.array_equal(seg.labels, case64.gt_seg.labels)


def test_zero_image_is_background():
    assert not np.any(threshold_segment(np.zeros((8, 8)), BANDS).labels)


def test_zero_filled_r8_dice_in_open_interval(case64):
    mask = poisson_mask((64, 64), 8, 12, 0)
    A = ForwardOperator(mask, case64.maps, 2)
    zf = normalize_intensity(zero_filled(A, apply_mask(case64.full_kspace, mask).data))
    d = dice_per_class(threshold_segment(zf, bands_from_levels(LEVELS), CLASSES), case64.gt_seg)
    assert all(0 < v < 1 for v in d.values())


def test_band_validation():
    with pytest.raises(ValueError, match="overlap"):
        threshold_segment(np.zeros((4, 4)), [(1, 0.0, 0.5), (2, 0.4, 0.8)])
    with pytest.raises(ValueError):
        threshold_segment(np.zeros((4, 4)), [(1, 0.5, 0.5)])
    with pytest.raises(ValueError):
        threshold_segment(np.zeros((4, 4)), [(0, 0.1, 0.5)])
    with pytest.raises(ValueError):
        threshold_segment(np.zeros((4, 4), complex), BANDS)


@given(hnp.arrays(np.float64, (10, 10), elements=st.floats(0, 1.2)))
def test_band_order_invariance(img):
    ref = threshold_segment(img, BANDS).labels
    for perm in itertools.permutations(BANDS):
        assert np.array_equal(threshold_segment(img, list(perm)).labels, ref)


@given(hnp.arrays(np.float64, (12, 12), elements=st.floats(0, 1.2)))
def test_largest_component_never_grows(img):
    plain = threshold_segment(img, BANDS).labels
    cc = threshold_segment(img, BANDS, largest_cc=True).labels
    for k in (1, 2, 3):
        assert np.count_nonzero(cc == k) <= np.count_nonzero(plain == k)
        assert np.all(plain[cc == k] == k)


def test_largest_component_keeps_biggest_blob():
    img = np.zeros((10, 10))
    img[1:3, 1:3] = 1.0
    img[5:9, 5:9] = 1.0
    seg = threshold_segment(img, [(1, 0.5, 1.5)], largest_cc=True)
    assert np.count_nonzero(seg.labels) == 16


def test_roundtrip(tmp_path, rng):
    labels = rng.integers(0, 4, (6, 7, 5))
    seg = SegmentationMap(labels, CLASSES)
    save_segmentation(seg, tmp_path / "s")
    back = load_segmentation(tmp_path / "s")
    assert np.array_equal(back.labels, labels)
    assert back.classes == CLASSES


def test_pairing_and_label_errors(tmp_path):
    save_segmentation(SegmentationMap(np.zeros((4, 4), int), CLASSES), tmp_path / "s")
    with pytest.raises(ValueError, match="does not match"):
        load_segmentation(tmp_path / "s", shape=(4, 5))
    with pytest.raises(ValueError, match="label 7"):
        SegmentationMap(np.full((2, 2), 7), CLASSES)
    with pytest.raises(ValueError):
        SegmentationMap(np.zeros((2, 2)), CLASSES)
    with pytest.raises(ValueError):
        SegmentationMap(np.zeros((2, 2), int), {0: "bg"})


def test_bands_from_levels():
    bands = dict((k, (lo, hi)) for k, lo, hi in bands_from_levels(LEVELS))
    assert bands[2] == (0.1, 0.25)
    assert bands[3] == (0.25, 0.65)
    assert bands[1][0] == 0.65 and np.isinf(bands[1][1])
    with pytest.raises(ValueError):
        bands_from_levels({1: 0.2, 2: 0.2})


def test_normalize_intensity(case64):
    assert np.array_equal(normalize_intensity(case64.gt_image), case64.gt_image)
    assert np.array_equal(normalize_intensity(2.5 * case64.gt_image), case64.gt_image)
    assert not np.any(normalize_intensity(np.zeros((4, 4))))
