"""Variable-density Poisson-disc undersampling masks.

Candidates are the phase-encode lattice points outside the autocalibration
(ACS) block, visited in a seeded random order. A candidate is accepted when
no accepted point lies closer than ``max(r(p), r(q))``, where the exclusion
radius grows linearly with distance from the k-space center::

    r(d) = r0 * (1 + alpha * d / d_max)

Visiting every lattice point makes the result a maximal Poisson-disc set,
which keeps the kept-point count a smooth function of ``r0``. Background
occupancy and blocking grids make each test O(r^2). ``r0`` is calibrated by
bisection against the requested acceleration and the ACS block is forced on
afterwards.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numba
import numpy as np

from kbench.rng import derive_seed, splitmix64

logger = logging.getLogger(__name__)

DEFAULT_ACS = 24
DEFAULT_ALPHA = 2.0
ACCEL_TOLERANCE = 0.1
MAX_BISECTION = 30


@dataclass
class SamplingMask:
    """Binary keep pattern over the phase-encode grid.

    ``keep`` covers the trailing k-space axes and is broadcast over coils and
    any leading (fully sampled readout or slice) axes.
    """

    keep: np.ndarray
    acs_size: int = 0
    requested_accel: float = 1.0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.keep = np.asarray(self.keep).astype(np.uint8)
        if self.keep.size == 0:
            raise ValueError("mask is empty")
        if np.any(self.keep > 1):
            raise ValueError("mask must be binary")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.keep.shape

    @property
    def accel(self) -> float:
        return mask_accel(self)

    @classmethod
    def full(cls, shape) -> "SamplingMask":
        return cls(np.ones(shape, dtype=np.uint8), 0, 1.0, 0)


def acs_slices(shape, acs_size: int) -> tuple[slice, ...]:
    """Index of the centered ``acs_size`` block (center at ``n // 2``)."""
    out = []
    for n in shape:
        size = min(acs_size, n)
        start = n // 2 - size // 2
        out.append(slice(start, start + size))
    return tuple(out)


def radius_map(shape, r0: float, alpha: float = DEFAULT_ALPHA) -> np.ndarray:
    """Local exclusion radius at every lattice point."""
    grids = np.meshgrid(*[np.arange(n) - n // 2 for n in shape], indexing="ij")
    dist = np.sqrt(sum(g.astype(np.float64) ** 2 for g in grids))
    d_max = max(float(dist.max()), 1.0)
    return r0 * (1.0 + alpha * dist / d_max)


@numba.njit(cache=True, nogil=True)
def _dart_throw(order, radius, allowed, ny, nx):
    occupied = np.zeros((ny, nx), dtype=np.bool_)
    blocked = np.zeros((ny, nx), dtype=np.bool_)
    for flat in order:
        iy = flat // nx
        ix = flat % nx
        if not allowed[iy, ix] or blocked[iy, ix]:
            continue
        rc = radius[iy, ix]
        rc2 = rc * rc
        w = int(math.ceil(rc))
        ok = True
        for dy in range(-w, w + 1):
            y = iy + dy
            if y < 0 or y >= ny:
                continue
            for dx in range(-w, w + 1):
                x = ix + dx
                if x < 0 or x >= nx:
                    continue
                if occupied[y, x] and dy * dy + dx * dx < rc2:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        occupied[iy, ix] = True
        # forbid every later candidate inside this point's own radius
        w = int(math.ceil(rc))
        for dy in range(-w, w + 1):
            y = iy + dy
            if y < 0 or y >= ny:
                continue
            for dx in range(-w, w + 1):
                x = ix + dx
                if 0 <= x < nx and dy * dy + dx * dx < rc2:
                    blocked[y, x] = True
    return occupied


def _visit_order(shape, seed: int) -> np.ndarray:
    keys = splitmix64(derive_seed(seed, "poisson-order"), np.arange(int(np.prod(shape))))
    return np.argsort(keys, kind="stable").astype(np.int64)


def _as_2d(shape):
    shape = tuple(int(n) for n in shape)
    if len(shape) == 1:
        return (1,) + shape
    if len(shape) != 2:
        raise ValueError(f"Poisson masks are defined on 1D or 2D phase grids, got {shape}")
    return shape


def poisson_disc(shape, r0: float, acs_size: int, seed: int, alpha: float = DEFAULT_ALPHA,
                 order: np.ndarray | None = None) -> np.ndarray:
    """One dart-throwing pass at a fixed base radius; ACS block not included."""
    grid = _as_2d(shape)
    radius = radius_map(grid, r0, alpha)
    allowed = np.ones(grid, dtype=np.bool_)
    allowed[acs_slices(grid, acs_size)] = False
    if order is None:
        order = _visit_order(grid, seed)
    occ = _dart_throw(order, radius, allowed, grid[0], grid[1])
    return occ.reshape(shape)


def poisson_mask(shape, accel: float, acs_size: int = DEFAULT_ACS, seed: int = 0,
                 alpha: float = DEFAULT_ALPHA) -> SamplingMask:
    """Variable-density Poisson-disc mask at acceleration ``accel``.

    Parameters
    ----------
    shape : tuple of int
        Phase-encode grid (2D, or 1D for line masks).
    accel : float
        Requested acceleration R > 1 (total / kept points).
    acs_size : int
        Edge length of the fully sampled center block.
    seed : int
        64-bit seed; the mask is a pure function of all arguments.

    Returns
    -------
    SamplingMask
        Achieved acceleration lies within 10% of ``accel``.
    """
    if not accel > 1.0:
        raise ValueError(f"acceleration must exceed 1, got {accel}")
    grid = _as_2d(shape)
    if acs_size < 0 or acs_size >= min(int(n) for n in shape):
        raise ValueError(f"acs_size={acs_size} must be below min(shape)={min(shape)}")
    total = int(np.prod(grid))
    acs = np.zeros(grid, dtype=bool)
    acs[acs_slices(grid, acs_size)] = True
    n_acs = int(acs.sum())
    lo_count = total / (accel * (1 + ACCEL_TOLERANCE))
    hi_count = total / (accel * (1 - ACCEL_TOLERANCE))
    if n_acs > hi_count:
        raise ValueError(
            f"infeasible: ACS block alone keeps {n_acs} of {total} points "
            f"(acceleration {total / n_acs:.2f}), below requested {accel}"
        )
    target = total / accel
    if total <= hi_count:
        return SamplingMask(np.ones(shape, dtype=np.uint8), acs_size, float(accel), int(seed),
                            {"alpha": alpha, "r0": 0.0})
    order = _visit_order(grid, seed)

    def count(r0):
        occ = poisson_disc(grid, r0, acs_size, seed, alpha, order)
        return occ, int(occ.sum()) + n_acs

    # r0 < 1 admits every lattice point; at r0 = 2*diag only a handful survive
    lo, hi = 0.0, 2.0 * math.hypot(*grid)
    best, best_r0 = None, None
    for _ in range(MAX_BISECTION):
        mid = 0.5 * (lo + hi)
        occ, kept = count(mid)
        if lo_count <= kept <= hi_count:
            best, best_r0 = occ, mid
            if abs(kept - target) <= 0.02 * target:
                break
        if kept > target:
            lo = mid
        else:
            hi = mid
    if best is None:
        # count is not strictly monotone in r0; thin the densest admissible
        # set, which cannot violate the minimum-distance property
        occ, kept = count(lo)
        excess = kept - int(round(target))
        if excess > 0:
            idx = np.flatnonzero(occ.ravel())
            keys = splitmix64(derive_seed(seed, "poisson-thin"), idx)
            drop = idx[np.argsort(keys, kind="stable")[:excess]]
            occ = occ.copy().ravel()
            occ[drop] = False
            occ = occ.reshape(grid)
        logger.debug("bisection did not bracket R=%s; thinned %d points", accel, max(excess, 0))
        best, best_r0 = occ, lo
    keep = best | acs
    return SamplingMask(keep.reshape(shape), acs_size, float(accel), int(seed),
                        {"alpha": alpha, "r0": best_r0})


def slice_masks(n_slices: int, shape, accel: float, acs_size: int = DEFAULT_ACS,
                seed: int = 0, alpha: float = DEFAULT_ALPHA) -> SamplingMask:
    """Independent per-slice masks stacked along a leading axis (2D acquisitions)."""
    keeps = [poisson_mask(shape, accel, acs_size, derive_seed(seed, "slice", i), alpha).keep
             for i in range(n_slices)]
    return SamplingMask(np.stack(keeps), acs_size, float(accel), int(seed), {"alpha": alpha})


def mask_accel(mask) -> float:
    """Total over kept points."""
    keep = mask.keep if isinstance(mask, SamplingMask) else np.asarray(mask)
    if keep.size == 0:
        raise ValueError("mask is empty")
    kept = int(np.count_nonzero(keep))
    if kept == 0:
        raise ValueError("mask keeps no samples")
    return keep.size / kept


def apply_mask(ksp, mask):
    """Zero every k-space entry the mask drops.

    The mask matches the trailing axes of ``ksp`` and is broadcast over the
    leading ones (coils, readout or slices). Returns the same type it was
    given (array or :class:`~kbench.coil.KSpaceData`).
    """
    from kbench.coil import KSpaceData

    keep = mask.keep if isinstance(mask, SamplingMask) else np.asarray(mask)
    data = ksp.data if isinstance(ksp, KSpaceData) else np.asarray(ksp)
    if keep.ndim > data.ndim or data.shape[data.ndim - keep.ndim:] != keep.shape:
        raise ValueError(f"mask shape {keep.shape} does not match k-space shape {data.shape}")
    out = np.where(keep.astype(bool), data, np.zeros((), dtype=data.dtype))
    if isinstance(ksp, KSpaceData):
        return KSpaceData(out, ksp.acquisition_mode)
    return out
