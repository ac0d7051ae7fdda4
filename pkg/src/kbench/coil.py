"""Synthetic coil sensitivities and coil expand/combine."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from kbench.rng import CounterRNG

ACQ_2D = "2D"
ACQ_3D = "3D"


@dataclass
class SensitivityMaps:
    """Complex per-coil weights, shape ``(coils, *spatial)``."""

    maps: np.ndarray

    def __post_init__(self):
        self.maps = np.asarray(self.maps, dtype=np.complex128)
        if self.maps.ndim < 2 or self.maps.shape[0] < 1:
            raise ValueError(f"maps need a leading coil axis, got shape {self.maps.shape}")

    @property
    def coil_count(self) -> int:
        return self.maps.shape[0]

    @property
    def spatial_shape(self) -> tuple[int, ...]:
        return self.maps.shape[1:]


@dataclass
class KSpaceData:
    """Multi-coil measurements, shape ``(coils, *kspace)``."""

    data: np.ndarray
    acquisition_mode: str = ACQ_2D

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.acquisition_mode not in (ACQ_2D, ACQ_3D):
            raise ValueError(f"acquisition_mode must be 2D or 3D, got {self.acquisition_mode!r}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("k-space contains non-finite entries")

    @property
    def coil_count(self) -> int:
        return self.data.shape[0]


def synth_maps(shape, coils: int, seed: int = 0, width: float = 0.6,
               max_phase: float = np.pi / 2) -> SensitivityMaps:
    """Smooth Gaussian-profile coil maps normalized to unit sum of squares.

    Coil centers sit evenly spaced on an ellipse just outside the field of
    view (in the last two axes; alternating above and below the mid-plane
    for 3D), each with a seeded rotation offset and a linear phase ramp of at
    most ``max_phase`` radians across the field of view.
    """
    if coils < 1:
        raise ValueError(f"coils must be >= 1, got {coils}")
    shape = tuple(int(n) for n in shape)
    rng = CounterRNG(seed)
    axes = [np.linspace(-1.0, 1.0, n) if n > 1 else np.zeros(1) for n in shape]
    grid = np.meshgrid(*axes, indexing="ij")
    offset = rng.uniform(None, 0.0, 2 * np.pi)
    maps = np.empty((coils,) + shape, dtype=np.complex128)
    for c in range(coils):
        theta = offset + 2 * np.pi * c / coils
        center = np.zeros(len(shape))
        center[-1] = 1.2 * np.cos(theta)
        if len(shape) >= 2:
            center[-2] = 1.2 * np.sin(theta)
        if len(shape) == 3:
            center[0] = 0.5 * (-1) ** c
        d2 = sum((g - x0) ** 2 for g, x0 in zip(grid, center))
        mag = np.exp(-d2 / (2 * width**2))
        slope = rng.uniform(len(shape), -1.0, 1.0) * max_phase / (2 * np.sqrt(len(shape)))
        phase = rng.uniform(None, -np.pi, np.pi) + sum(s * g for s, g in zip(slope, grid))
        maps[c] = mag * np.exp(1j * phase)
    norm = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return SensitivityMaps(maps / norm)


def _maps_array(S) -> np.ndarray:
    return S.maps if isinstance(S, SensitivityMaps) else np.asarray(S)


def expand(img, S) -> np.ndarray:
    """Per-coil images ``S_c * img``."""
    maps = _maps_array(S)
    img = np.asarray(img)
    if img.shape != maps.shape[1:]:
        raise ValueError(f"image shape {img.shape} does not match maps {maps.shape[1:]}")
    return maps * img


def combine(stack, S) -> np.ndarray:
    """Adjoint of :func:`expand`: ``sum_c conj(S_c) * stack_c``."""
    maps = _maps_array(S)
    stack = np.asarray(stack)
    if stack.shape != maps.shape:
        raise ValueError(f"coil stack shape {stack.shape} does not match maps {maps.shape}")
    return np.sum(np.conj(maps) * stack, axis=0)


def rss(stack) -> np.ndarray:
    """Root sum of squares over the coil axis."""
    stack = np.asarray(stack)
    if stack.ndim == 0 or stack.shape[0] == 0:
        raise ValueError("empty coil stack")
    return np.sqrt(np.sum(np.abs(stack) ** 2, axis=0))
