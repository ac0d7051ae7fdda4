import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import crandn
from kbench.coil import KSpaceData
from kbench.sampling import (SamplingMask, acs_slices, apply_mask, mask_accel, poisson_mask,
                             radius_map, slice_masks)


def brute_min_distance_ok(mask: SamplingMask) -> bool:
    """Every pair of kept non-ACS points is at least max(r_p, r_q) apart."""
    keep = mask.keep.astype(bool).copy()
    keep[acs_slices(keep.shape, mask.acs_size)] = False
    pts = np.argwhere(keep)
    r = radius_map(keep.shape, mask.meta["r0"], mask.meta["alpha"])[keep]
    for i in range(len(pts)):
        d = np.sqrt(((pts[i + 1:] - pts[i]) ** 2).sum(axis=1))
        if np.any(d < np.maximum(r[i], r[i + 1:]) - 1e-9):
            return False
    return True


def test_near_one_acceleration_is_full():
    m = poisson_mask((16, 16), 1.05, acs_size=0, seed=3)
    assert m.keep.all()
    assert mask_accel(m) == 1.0


def test_r8_kept_fraction_256():
    m = poisson_mask((256, 256), 8, acs_size=24, seed=11)
    frac = m.keep.mean()
    assert 0.1125 <= frac <= 0.1375


def test_min_distance_bruteforce_64():
    for accel, seed in [(4, 0), (8, 1), (16, 2)]:
        m = poisson_mask((64, 64), accel, acs_size=12, seed=seed)
        assert brute_min_distance_ok(m)


def test_acs_block_is_full():
    m = poisson_mask((64, 48), 6, acs_size=10, seed=4)
    assert m.keep[acs_slices(m.shape, 10)].all()


def test_deterministic():
    a = poisson_mask((64, 64), 8, 12, seed=99)
    b = poisson_mask((64, 64), 8, 12, seed=99)
    c = poisson_mask((64, 64), 8, 12, seed=100)
    assert np.array_equal(a.keep, b.keep)
    assert not np.array_equal(a.keep, c.keep)


def test_monotone_kept_count():
    counts = [int(poisson_mask((96, 96), r, 12, seed=5).keep.sum()) for r in (2, 4, 8, 16, 32)]
    assert counts == sorted(counts, reverse=True)


def test_variable_density():
    for accel in (4, 8, 16):
        m = poisson_mask((128, 128), accel, 0, seed=2)
        yy, xx = np.indices(m.shape) - 64
        rad = np.hypot(yy, xx)
        d_max = rad.max()
        inner = m.keep[rad <= 0.25 * d_max].mean()
        outer = m.keep[rad >= 0.75 * d_max].mean()
        assert inner >= outer


def test_one_dimensional_line_mask():
    m = poisson_mask((128,), 4, acs_size=8, seed=1)
    assert m.shape == (128,)
    assert 3.6 <= m.accel <= 4.4


def test_infeasible_accel_rejected():
    with pytest.raises(ValueError, match="infeasible"):
        poisson_mask((32, 32), 16, acs_size=24, seed=0)
    with pytest.raises(ValueError):
        poisson_mask((32, 32), 1.0, acs_size=4)
    with pytest.raises(ValueError):
        poisson_mask((32, 32), 4, acs_size=32)


@settings(max_examples=15)
@given(st.sampled_from([4.0, 6.0, 8.0, 12.0, 16.0]), st.integers(0, 2**63))
def test_accel_within_tolerance(accel, seed):
    m = poisson_mask((64, 64), accel, 8, seed)
    assert 0.9 * accel <= m.accel <= 1.1 * accel


def test_mask_accel_examples():
    assert mask_accel(np.ones((16, 16))) == 1.0
    half = np.zeros((16, 16), np.uint8)
    half[:, ::2] = 1
    assert mask_accel(half) == 2.0
    m = poisson_mask((128, 128), 16, 12, seed=8)
    assert 14.4 <= mask_accel(m) <= 17.6
    with pytest.raises(ValueError):
        mask_accel(np.zeros((4, 4)))


def test_apply_mask_examples(rng):
    k = crandn(rng, (4, 16, 16))
    assert np.array_equal(apply_mask(k, np.ones((16, 16))), k)
    acs_only = np.zeros((16, 16), np.uint8)
    acs_only[acs_slices((16, 16), 4)] = 1
    out = apply_mask(k, acs_only)
    assert np.count_nonzero(out) == 4 * 16
    keep = rng.random((16, 16)) < 0.3
    out = apply_mask(k, keep)
    assert np.isclose(np.sum(np.abs(out) ** 2), sum(np.abs(k[c][keep]) ** 2 for c in range(4)).sum())
    assert np.all(out[:, ~keep] == 0)


def test_apply_mask_broadcast_and_type(rng):
    k = KSpaceData(crandn(rng, (2, 5, 8, 8)), "3D")
    keep = np.zeros((8, 8), np.uint8)
    keep[2, 3] = 1
    out = apply_mask(k, keep)
    assert isinstance(out, KSpaceData)
    assert np.count_nonzero(out.data) == 2 * 5
    with pytest.raises(ValueError):
        apply_mask(k, np.ones((8, 5)))


def test_slice_masks_independent():
    m = slice_masks(3, (64, 64), 8, 8, seed=1)
    assert m.keep.shape == (3, 64, 64)
    assert not np.array_equal(m.keep[0], m.keep[1])


def test_mask_validation():
    with pytest.raises(ValueError):
        SamplingMask(np.full((2, 2), 2))
    with pytest.raises(ValueError):
        SamplingMask(np.zeros((0,)))
