"""Sparsifying transforms: orthonormal periodized DWT, complex soft
thresholding and anisotropic total variation."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

# Daubechies decomposition low-pass filters (orthonormal, sum = sqrt(2)).
_DB4 = np.array([
    -0.010597401785069032, 0.0328830116668852, 0.030841381835560764,
    -0.18703481171909309, -0.027983769416859854, 0.6308807679298589,
    0.7148465705529157, 0.2303778133088965,
])
_HAAR = 1.0 / np.sqrt(2.0)
FILTERS = {
    "haar": np.array([1.0, 1.0]) / np.sqrt(2.0),
    "db4": _DB4[::-1].copy(),
}


def wavelet_filters(family: str) -> tuple[np.ndarray, np.ndarray]:
    """Analysis low/high-pass pair ``(h, g)`` with ``g[k] = (-1)^k h[L-1-k]``."""
    try:
        h = FILTERS[family]
    except KeyError:
        raise ValueError(f"unknown wavelet family {family!r}; choose from {sorted(FILTERS)}")
    g = h[::-1] * (-1.0) ** np.arange(len(h))
    return h, g


@lru_cache(maxsize=64)
def analysis_matrix(family: str, n: int) -> np.ndarray:
    """One periodized analysis level as an orthogonal ``n x n`` matrix:
    rows ``0..n/2-1`` give ``a[i] = sum_k h[k] x[(2i + k) mod n]``, the rest
    the matching high-pass outputs."""
    if n % 2:
        raise ValueError(f"axis length {n} is odd")
    h, g = wavelet_filters(family)
    W = np.zeros((n, n))
    rows = np.arange(n // 2)
    for k in range(len(h)):
        cols = (2 * rows + k) % n
        np.add.at(W, (rows, cols), h[k])
        np.add.at(W, (rows + n // 2, cols), g[k])
    W.flags.writeable = False
    return W


def _haar(x: np.ndarray, axis: int, inverse: bool) -> np.ndarray:
    # pairwise sums and differences: exact zeros on constant input
    a, b = np.split(x, 2, axis=axis) if inverse else (
        np.take(x, np.arange(0, x.shape[axis], 2), axis=axis),
        np.take(x, np.arange(1, x.shape[axis], 2), axis=axis))
    s, d = (a + b) * _HAAR, (a - b) * _HAAR
    if not inverse:
        return np.concatenate([s, d], axis=axis)
    out = np.empty_like(x)
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(0, None, 2)
    out[tuple(idx)] = s
    idx[axis] = slice(1, None, 2)
    out[tuple(idx)] = d
    return out


def _apply(W: np.ndarray, x: np.ndarray, axis: int) -> np.ndarray:
    if x.ndim == 2:
        return W @ x if axis == 0 else x @ W.T
    return np.moveaxis(np.tensordot(W, x, axes=([1], [axis])), 0, axis)


@dataclass
class WaveletCoeffs:
    """Coefficients in Mallat layout: level-``j`` approximation occupies the
    low corner of ``array``; details fill the rest.

    ``pad`` records the symmetric zero padding applied before the transform
    as ``(before, after)`` per axis; :func:`idwt` crops it away.
    """

    array: np.ndarray
    family: str
    levels: int
    axes: tuple[int, ...]
    pad: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def approx_slice(self, level: int | None = None) -> tuple[slice, ...]:
        level = self.levels if level is None else level
        sl = [slice(None)] * self.array.ndim
        for ax in self.axes:
            sl[ax] = slice(0, self.array.shape[ax] >> level)
        return tuple(sl)

    @property
    def detail_mask(self) -> np.ndarray:
        mask = np.ones(self.array.shape, dtype=bool)
        mask[self.approx_slice()] = False
        return mask

    @property
    def subbands(self) -> list[np.ndarray]:
        """Final approximation followed by detail bands, coarsest level first."""
        bands = [self.array[self.approx_slice()]]
        for level in range(self.levels, 0, -1):
            nd = len(self.axes)
            for code in range(1, 2**nd):
                sl = [slice(None)] * self.array.ndim
                for i, ax in enumerate(self.axes):
                    size = self.array.shape[ax] >> level
                    hi = (code >> (nd - 1 - i)) & 1
                    sl[ax] = slice(hi * size, (hi + 1) * size)
                bands.append(self.array[tuple(sl)])
        return bands


def required_padding(shape, levels: int, axes=None) -> tuple[tuple[int, int], ...]:
    axes = tuple(range(len(shape))) if axes is None else axes
    step = 2**levels
    pad = []
    for ax, n in enumerate(shape):
        extra = (-n) % step if ax in axes else 0
        pad.append((extra // 2, extra - extra // 2))
    return tuple(pad)


def dwt(img, family: str = "db4", levels: int = 3, axes=None, pad: bool = False) -> WaveletCoeffs:
    """Separable orthonormal DWT with periodic boundaries.

    Every transformed axis must be divisible by ``2**levels`` unless
    ``pad=True``, in which case the image is zero padded symmetrically.
    """
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    x = np.asarray(img)
    axes = tuple(range(x.ndim)) if axes is None else tuple(a % x.ndim for a in axes)
    padding = required_padding(x.shape, levels, axes)
    if any(p != (0, 0) for p in padding):
        if not pad:
            raise ValueError(
                f"shape {x.shape} not divisible by 2**{levels} on axes {axes}; "
                f"required padding {padding}"
            )
        x = np.pad(x, padding)
    wavelet_filters(family)
    out = x.astype(np.result_type(x, np.float64), copy=True)
    for level in range(levels):
        sl = [slice(None)] * x.ndim
        for ax in axes:
            sl[ax] = slice(0, x.shape[ax] >> level)
        sl = tuple(sl)
        block = out[sl]
        for ax in axes:
            if family == "haar":
                block = _haar(block, ax, False)
            else:
                block = _apply(analysis_matrix(family, block.shape[ax]), block, ax)
        out[sl] = block
    return WaveletCoeffs(out, family, levels, axes, padding)


def idwt(coeffs: WaveletCoeffs) -> np.ndarray:
    """Inverse of :func:`dwt`, cropping any padding."""
    out = coeffs.array.copy()
    for level in range(coeffs.levels - 1, -1, -1):
        sl = [slice(None)] * out.ndim
        for ax in coeffs.axes:
            sl[ax] = slice(0, out.shape[ax] >> level)
        sl = tuple(sl)
        block = out[sl]
        for ax in reversed(coeffs.axes):
            if coeffs.family == "haar":
                block = _haar(block, ax, True)
            else:
                # orthogonal, so the inverse is the transpose
                block = _apply(analysis_matrix(coeffs.family, block.shape[ax]).T, block, ax)
        out[sl] = block
    if coeffs.pad:
        crop = tuple(slice(b, n - a) for (b, a), n in zip(coeffs.pad, out.shape))
        out = out[crop]
    return out


def soft_threshold(v, tau: float):
    """Complex magnitude shrinkage ``v * max(1 - tau/|v|, 0)``."""
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    v = np.asarray(v)
    mag = np.abs(v)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(mag > tau, 1.0 - tau / np.where(mag > 0, mag, 1.0), 0.0)
    out = v * scale
    return out if out.ndim else out[()]


def gradient(x) -> np.ndarray:
    """Forward differences per axis, stacked on a new leading axis.

    The last entry along each axis is zero (no wrap-around).
    """
    x = np.asarray(x)
    out = np.zeros((x.ndim,) + x.shape, dtype=np.result_type(x, np.float64))
    for ax in range(x.ndim):
        d = np.diff(x, axis=ax)
        sl = [slice(None)] * x.ndim
        sl[ax] = slice(0, x.shape[ax] - 1)
        out[(ax,) + tuple(sl)] = d
    return out


def divergence(p) -> np.ndarray:
    """Discrete divergence with ``<gradient(x), p> = <x, -divergence(p)>``."""
    p = np.asarray(p)
    ndim = p.shape[0]
    out = np.zeros(p.shape[1:], dtype=p.dtype)
    for ax in range(ndim):
        comp = p[ax]
        n = comp.shape[ax]
        first = [slice(None)] * ndim
        first[ax] = slice(0, n - 1)
        shifted = np.zeros_like(comp)
        dst = [slice(None)] * ndim
        dst[ax] = slice(1, n)
        shifted[tuple(dst)] = comp[tuple(first)]
        valid = np.zeros_like(comp)
        valid[tuple(first)] = comp[tuple(first)]
        out += valid - shifted
    return out


def tv_value(img) -> float:
    """Anisotropic total variation: sum of absolute forward differences."""
    x = np.asarray(img)
    return float(sum(np.abs(np.diff(x, axis=ax)).sum() for ax in range(x.ndim)))


def tv_grad_components(img) -> np.ndarray:
    """Per-axis finite-difference gradient used as the TV dual variable
    shape; pair with :func:`divergence` for the adjoint."""
    return gradient(img)
