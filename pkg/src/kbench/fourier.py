"""Centered orthonormal FFTs over the trailing spatial axes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SPATIAL = "spatial"
FREQUENCY = "frequency"


@dataclass
class ImageVolume:
    """Complex or real array tagged with the domain it lives in."""

    data: np.ndarray
    domain_tag: str = SPATIAL

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.domain_tag not in (SPATIAL, FREQUENCY):
            raise ValueError(f"unknown domain_tag {self.domain_tag!r}")
        if self.data.ndim == 0 or min(self.data.shape) < 1:
            raise ValueError(f"invalid shape {self.data.shape}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape


def _check(x: np.ndarray, ndim: int) -> tuple[int, ...]:
    if ndim not in (1, 2, 3):
        raise ValueError(f"ndim must be 1, 2 or 3, got {ndim}")
    if ndim > x.ndim:
        raise ValueError(f"ndim={ndim} exceeds array rank {x.ndim}")
    if not np.all(np.isfinite(x)):
        bad = np.argwhere(~np.isfinite(x))[0]
        raise ValueError(f"non-finite value at index {tuple(int(i) for i in bad)}")
    return tuple(range(-ndim, 0))


def _fft(x, ndim, inverse):
    x = np.asarray(x)
    axes = _check(x, ndim)
    x = np.fft.ifftshift(x, axes=axes)
    x = (np.fft.ifftn if inverse else np.fft.fftn)(x, axes=axes, norm="ortho")
    return np.fft.fftshift(x, axes=axes)


def fft_centered(img, ndim: int = 2):
    """Unitary DFT over the last ``ndim`` axes with the DC term at the center.

    Accepts a plain array (returned as an array) or an :class:`ImageVolume`
    in the spatial domain (returned tagged as frequency). Leading axes such
    as coils are batched.
    """
    if isinstance(img, ImageVolume):
        if img.domain_tag != SPATIAL:
            raise ValueError("fft_centered expects a spatial-domain volume")
        return ImageVolume(_fft(img.data, ndim, False), FREQUENCY)
    return _fft(img, ndim, False)


def ifft_centered(ksp, ndim: int = 2):
    """Inverse of :func:`fft_centered`."""
    if isinstance(ksp, ImageVolume):
        if ksp.domain_tag != FREQUENCY:
            raise ValueError("ifft_centered expects a frequency-domain volume")
        return ImageVolume(_fft(ksp.data, ndim, True), SPATIAL)
    return _fft(ksp, ndim, True)
