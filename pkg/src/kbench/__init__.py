"""Undersampled multi-coil MRI simulation, classical reconstruction and
segmentation benchmarking."""

from kbench.coil import KSpaceData, SensitivityMaps, combine, expand, rss, synth_maps
from kbench.fourier import ImageVolume, fft_centered, ifft_centered
from kbench.operator import (
    ForwardOperator,
    adjoint,
    data_consistency,
    forward,
    zero_filled,
)
from kbench.sampling import SamplingMask, apply_mask, mask_accel, poisson_mask

__version__ = "0.1.0"

__all__ = [
    "ForwardOperator",
    "ImageVolume",
    "KSpaceData",
    "SamplingMask",
    "SensitivityMaps",
    "adjoint",
    "apply_mask",
    "combine",
    "data_consistency",
    "expand",
    "fft_centered",
    "forward",
    "ifft_centered",
    "mask_accel",
    "poisson_mask",
    "rss",
    "synth_maps",
    "zero_filled",
]
