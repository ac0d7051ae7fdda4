"""Shepp-Logan phantoms with exact label maps and simulated k-space.

Intensities follow the modified Shepp-Logan table (Toft), painted in table
order so every label owns a single intensity:

======  ================  ================  =========
label   name              ellipses          intensity
======  ================  ================  =========
1       shell             1 minus 2         1.0
2       tissue            2                 0.2
0       ventricles        3, 4              0.0
3       lesion            5 to 10           0.3
======  ================  ================  =========

The two ventricles keep the background intensity and label. Overlaps among
the small ellipses therefore stay at 0.3 instead of summing to 0.4 as in the
additive table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kbench.coil import ACQ_2D, ACQ_3D, KSpaceData, SensitivityMaps, expand, synth_maps
from kbench.fourier import fft_centered
from kbench.rng import CounterRNG, derive_seed
from kbench.segment import SegmentationMap

CLASSES = {1: "shell", 2: "tissue", 3: "lesion"}
LEVELS = {1: 1.0, 2: 0.2, 3: 0.3}
MAX_ATTEMPTS = 10

# a, b, c, x0, y0, z0, phi(deg), label
_TABLE = np.array([
    [0.6900, 0.920, 0.810, 0.00, 0.0000, 0.00, 0.0, 1],
    [0.6624, 0.874, 0.780, 0.00, -0.0184, 0.00, 0.0, 2],
    [0.1100, 0.310, 0.220, 0.22, 0.0000, 0.00, -18.0, 0],
    [0.1600, 0.410, 0.280, -0.22, 0.0000, 0.00, 18.0, 0],
    [0.2100, 0.250, 0.410, 0.00, 0.3500, -0.15, 0.0, 3],
    [0.0460, 0.046, 0.050, 0.00, 0.1000, 0.25, 0.0, 3],
    [0.0460, 0.046, 0.050, 0.00, -0.1000, 0.25, 0.0, 3],
    [0.0460, 0.023, 0.050, -0.08, -0.6050, 0.00, 0.0, 3],
    [0.0230, 0.023, 0.020, 0.00, -0.6060, 0.00, 0.0, 3],
    [0.0230, 0.046, 0.020, 0.06, -0.6050, 0.00, 0.0, 3],
])
# ellipses sharing a jitter draw (the skull pair keeps its thickness)
_JITTER_GROUP = [0, 0, 1, 2, 3, 4, 5, 6, 7, 8]


@dataclass
class PhantomCase:
    gt_image: np.ndarray
    gt_seg: SegmentationMap
    maps: SensitivityMaps
    full_kspace: KSpaceData
    case_id: str
    seed: int | None

    @property
    def ndim(self) -> int:
        return self.gt_image.ndim


def ellipse_table(jitter: float = 0.0, seed: int | None = None) -> np.ndarray:
    table = _TABLE.copy()
    if not jitter or seed is None:
        return table
    rng = CounterRNG(seed)
    groups = max(_JITTER_GROUP) + 1
    d_center = rng.uniform((groups, 3), -jitter, jitter)
    d_axes = rng.uniform((groups, 3), -jitter, jitter)
    for i, grp in enumerate(_JITTER_GROUP):
        table[i, 0:3] *= 1.0 + d_axes[grp]
        table[i, 3:6] += d_center[grp]
    return table


def _coords(shape):
    # pixel centers in [-1, 1]; first spatial axis of a 2D image is y (top = +1)
    ax = [1.0 - (2.0 * np.arange(n) + 1.0) / n for n in shape]
    if len(shape) == 2:
        y, x = np.meshgrid(ax[0], -ax[1], indexing="ij")
        return x, y, None
    z, y, x = np.meshgrid(ax[0], ax[1], -ax[2], indexing="ij")
    return x, y, z


def render(shape, table) -> tuple[np.ndarray, np.ndarray]:
    """Paint ``table`` on a grid; returns ``(image, labels)``."""
    shape = tuple(int(n) for n in shape)
    if len(shape) not in (2, 3):
        raise ValueError(f"phantoms are 2D or 3D, got shape {shape}")
    x, y, z = _coords(shape)
    image = np.zeros(shape)
    labels = np.zeros(shape, dtype=np.uint16)
    for a, b, c, x0, y0, z0, phi, label in table:
        t = np.deg2rad(phi)
        dx, dy = x - x0, y - y0
        xr = dx * np.cos(t) + dy * np.sin(t)
        yr = -dx * np.sin(t) + dy * np.cos(t)
        inside = (xr / a) ** 2 + (yr / b) ** 2
        if z is not None:
            inside = inside + ((z - z0) / c) ** 2
        sel = inside <= 1.0
        label = int(label)
        labels[sel] = label
        image[sel] = LEVELS.get(label, 0.0)
    return image, labels


def make_phantom(shape, coils: int = 4, jitter_seed: int | None = None, jitter: float = 0.03,
                 case_id: str = "case_000", maps_seed: int | None = None,
                 noise_std: float = 0.0) -> PhantomCase:
    """One phantom case with exact segmentation and fully sampled k-space.

    ``jitter_seed=None`` gives the canonical phantom. ``noise_std`` adds
    complex Gaussian noise to the k-space (off by default).
    """
    shape = tuple(int(n) for n in shape)
    if len(shape) not in (2, 3) or min(shape) < 32:
        raise ValueError(f"phantom shape must be 2D or 3D with every axis >= 32, got {shape}")
    if coils < 1:
        raise ValueError(f"coils must be >= 1, got {coils}")
    for attempt in range(MAX_ATTEMPTS):
        seed = None if jitter_seed is None else derive_seed(jitter_seed, "jitter", attempt)
        image, labels = render(shape, ellipse_table(jitter, seed))
        counts = np.bincount(labels.ravel(), minlength=max(CLASSES) + 1)
        if all(counts[k] > 0 for k in CLASSES):
            break
        if jitter_seed is None:
            raise ValueError(f"canonical phantom at {shape} leaves a class empty")
    else:
        raise ValueError(f"jitter left a class empty after {MAX_ATTEMPTS} attempts")
    base = 0 if jitter_seed is None else jitter_seed
    maps = synth_maps(shape, coils, derive_seed(base, "maps") if maps_seed is None else maps_seed)
    ksp = fft_centered(expand(image.astype(np.complex128), maps), len(shape))
    if noise_std > 0:
        rng = CounterRNG(derive_seed(base, "noise"))
        noise = rng.normal(ksp.shape) + 1j * rng.normal(ksp.shape)
        ksp = ksp + noise_std / np.sqrt(2.0) * noise
    mode = ACQ_2D if len(shape) == 2 else ACQ_3D
    return PhantomCase(image, SegmentationMap(labels, CLASSES), maps, KSpaceData(ksp, mode),
                       case_id, jitter_seed)


def make_dataset(n_cases: int, shape, coils: int = 4, seed: int = 0, jitter: float = 0.03,
                 noise_std: float = 0.0) -> list[PhantomCase]:
    """``n_cases`` independently jittered phantoms, ids ``case_000``, ..."""
    if n_cases < 0:
        raise ValueError("n_cases must be nonnegative")
    return [make_phantom(shape, coils, derive_seed(seed, "case", i), jitter, f"case_{i:03d}",
                         noise_std=noise_std)
            for i in range(n_cases)]
