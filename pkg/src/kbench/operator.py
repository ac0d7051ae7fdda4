"""The multi-coil Cartesian measurement operator ``A = M F S``.

With unitary ``F``, unit sum-of-squares maps ``S`` and a binary mask ``M``
the operator norm is at most 1. Solvers rely on that bound for their step
sizes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np
import scipy.fft

from kbench.coil import KSpaceData, SensitivityMaps, combine, expand
from kbench.fourier import fft_centered, ifft_centered
from kbench.sampling import SamplingMask, apply_mask

logger = logging.getLogger(__name__)

DC_RTOL = 1e-7
DC_MAX_ITER = 50_000


@dataclass
class ForwardOperator:
    mask: SamplingMask
    maps: SensitivityMaps
    ndim: int = 2

    def __post_init__(self):
        if self.ndim not in (2, 3):
            raise ValueError(f"ndim must be 2 or 3, got {self.ndim}")
        spatial = self.maps.spatial_shape
        if len(spatial) < self.ndim:
            raise ValueError(f"maps of rank {len(spatial)} cannot support ndim={self.ndim}")
        keep = self.mask.keep
        if keep.ndim > len(spatial) or spatial[len(spatial) - keep.ndim:] != keep.shape:
            raise ValueError(f"mask shape {keep.shape} inconsistent with maps {spatial}")

    @property
    def image_shape(self) -> tuple[int, ...]:
        return self.maps.spatial_shape

    @property
    def kspace_shape(self) -> tuple[int, ...]:
        return self.maps.maps.shape

    @property
    def keep(self) -> np.ndarray:
        """Mask broadcast to the full multi-coil k-space shape."""
        return np.broadcast_to(self.mask.keep.astype(bool), self.kspace_shape)

    @cached_property
    def fast(self) -> "ShiftedOperator":
        return ShiftedOperator(self)


class ShiftedOperator:
    """``A`` evaluated without per-call fftshifts, for iterative solvers.

    Images stay in natural coordinates; k-space lives in ``ifftshift``-ed
    coordinates (``to_kspace``/``from_kspace`` convert). Maps and mask are
    shifted once up front so each application is one batched FFT.
    """

    def __init__(self, A: ForwardOperator):
        self.axes = tuple(range(-A.ndim, 0))
        self.img_axes = tuple(range(-A.ndim, 0))
        self.maps = np.fft.ifftshift(A.maps.maps, axes=self.axes)
        self.conj_maps = np.conj(self.maps)
        self.keep = np.fft.ifftshift(A.keep, axes=self.axes)
        self.full = bool(self.keep.all())

    def to_kspace(self, y: np.ndarray) -> np.ndarray:
        return np.fft.ifftshift(y, axes=self.axes)

    def from_kspace(self, k: np.ndarray) -> np.ndarray:
        return np.fft.fftshift(k, axes=self.axes)

    def forward(self, x: np.ndarray) -> np.ndarray:
        k = scipy.fft.fftn(self.maps * np.fft.ifftshift(x, axes=self.img_axes),
                           axes=self.axes, norm="ortho")
        if not self.full:
            k *= self.keep
        return k

    def adjoint(self, k: np.ndarray) -> np.ndarray:
        if not self.full:
            k = k * self.keep
        img = np.sum(self.conj_maps * scipy.fft.ifftn(k, axes=self.axes, norm="ortho"), axis=0)
        return np.fft.fftshift(img, axes=self.img_axes)

    def normal(self, x: np.ndarray) -> np.ndarray:
        return self.adjoint(self.forward(x))


def _kspace(y) -> np.ndarray:
    return y.data if isinstance(y, KSpaceData) else np.asarray(y)


def _check_y(A: ForwardOperator, y: np.ndarray) -> None:
    if y.shape != A.kspace_shape:
        raise ValueError(f"k-space shape {y.shape} does not match operator {A.kspace_shape}")


def forward(A: ForwardOperator, x) -> np.ndarray:
    """``M F S x`` coilwise; returns masked multi-coil k-space."""
    x = x.data if hasattr(x, "domain_tag") else np.asarray(x)
    if x.shape != A.image_shape:
        raise ValueError(f"image shape {x.shape} does not match operator {A.image_shape}")
    return apply_mask(fft_centered(expand(x, A.maps), A.ndim), A.mask)


def adjoint(A: ForwardOperator, y) -> np.ndarray:
    """``S^H F^H M y``."""
    y = _kspace(y)
    _check_y(A, y)
    return combine(ifft_centered(apply_mask(y, A.mask), A.ndim), A.maps)


def zero_filled(A: ForwardOperator, y) -> np.ndarray:
    """Zero-filled reconstruction: missing samples set to zero, inverse FFT,
    coil combine. Identical to :func:`adjoint`; kept as a separate name
    because it is the naive baseline every method is compared against."""
    return adjoint(A, y)


def kspace_residual(A: ForwardOperator, x, y) -> float:
    """Largest deviation of ``forward(x)`` from ``y`` on sampled locations."""
    y = _kspace(y)
    diff = forward(A, x) - y
    return float(np.max(np.abs(diff[A.keep]), initial=0.0))


def data_consistency(A: ForwardOperator, x, y, rtol: float = DC_RTOL, atol: float | None = None,
                     max_iter: int = DC_MAX_ITER) -> np.ndarray:
    """Hard data consistency: project ``x`` onto ``{z : A z = y}``.

    The per-coil k-space of ``x`` has its sampled entries overwritten with
    ``y``, is inverse transformed and coil-combined. For a single unit coil,
    or full sampling, that replacement already is the orthogonal projection
    and the result is exact after one step. With several coils the combine
    mixes channels, so the same replacement residual is driven to zero by
    conjugate gradients on the least-squares problem ``min |A d - r|``
    started at ``d = 0`` (minimum-norm correction).

    Stops once every sampled entry matches ``y`` to ``atol``, which defaults
    to ``rtol * max(1, max|y|)``.

    Raises
    ------
    ValueError
        On shape mismatch or non-finite ``x``.
    """
    x = np.asarray(x)
    if x.shape != A.image_shape:
        raise ValueError(f"image shape {x.shape} does not match operator {A.image_shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("data consistency input contains non-finite values")
    y = _kspace(y)
    _check_y(A, y)
    op = A.fast
    ys = op.to_kspace(y) * op.keep
    x = x.astype(np.result_type(x, np.complex64), copy=True)
    if atol is None:
        atol = rtol * max(float(np.max(np.abs(ys), initial=0.0)), 1.0)
    d, n_iter = _cgls(op, ys - op.forward(x), atol, max_iter)
    if n_iter >= max_iter:
        logger.warning("data consistency stopped at max_iter=%d", max_iter)
    return x + d


@numba.njit(cache=True, nogil=True)
def _expand_into(out, maps, v):
    for c in range(maps.shape[0]):
        for i in range(v.shape[0]):
            out[c, i] = maps[c, i] * v[i]


@numba.njit(cache=True, nogil=True)
def _mask_norm(k, keep):
    total = 0.0
    for c in range(k.shape[0]):
        for i in range(k.shape[1]):
            val = k[c, i] * keep[c, i]
            k[c, i] = val
            total += val.real * val.real + val.imag * val.imag
    return total


@numba.njit(cache=True, nogil=True)
def _combine_norm(out, conj_maps, k):
    total = 0.0
    for i in range(out.shape[0]):
        acc = 0j
        for c in range(k.shape[0]):
            acc += conj_maps[c, i] * k[c, i]
        out[i] = acc
        total += acc.real * acc.real + acc.imag * acc.imag
    return total


@numba.njit(cache=True, nogil=True)
def _step(d, p, r, q, alpha):
    worst = 0.0
    for i in range(d.shape[0]):
        d[i] += alpha * p[i]
    for c in range(r.shape[0]):
        for i in range(r.shape[1]):
            val = r[c, i] - alpha * q[c, i]
            r[c, i] = val
            mag = val.real * val.real + val.imag * val.imag
            if mag > worst:
                worst = mag
    return np.sqrt(worst)


@numba.njit(cache=True, nogil=True)
def _update_direction(p, s, beta):
    for i in range(p.shape[0]):
        p[i] = s[i] + beta * p[i]


def _cgls(op: ShiftedOperator, r: np.ndarray, atol: float, max_iter: int):
    """Minimum-norm ``d`` with ``op.forward(d) = r`` by CGLS from zero.

    Iterates in ifftshifted image coordinates on flattened arrays so no
    shifts or temporaries happen per step; elementwise work is fused.
    """
    shape = op.maps.shape
    coils, size = shape[0], int(np.prod(shape[1:]))
    d = np.zeros(size, dtype=np.complex128)
    if np.max(np.abs(r), initial=0.0) <= atol:
        return d.reshape(shape[1:]), 0
    maps = np.ascontiguousarray(op.maps, dtype=np.complex128).reshape(coils, size)
    conj_maps = np.conj(maps)
    keep = np.ascontiguousarray(op.keep, dtype=np.float64).reshape(coils, size)
    axes = op.axes
    if len(axes) == 2:
        fft = lambda a: scipy.fft.fft2(a, norm="ortho", overwrite_x=True)  # noqa: E731
        ifft = lambda a: scipy.fft.ifft2(a, norm="ortho")  # noqa: E731
    else:
        fft = lambda a: scipy.fft.fftn(a, axes=axes, norm="ortho", overwrite_x=True)  # noqa: E731
        ifft = lambda a: scipy.fft.ifftn(a, axes=axes, norm="ortho")  # noqa: E731
    work = np.empty((coils, size), dtype=np.complex128)

    def fwd(v):
        _expand_into(work, maps, v)
        q = fft(work.reshape(shape)).reshape(coils, size)
        return q, _mask_norm(q, keep)

    def adj(k, out):
        return _combine_norm(out, conj_maps, ifft(k.reshape(shape)).reshape(coils, size))

    r0 = np.ascontiguousarray(r, dtype=np.complex128).reshape(coils, size) * keep
    r = r0.copy()
    s = np.empty(size, dtype=np.complex128)
    gamma = adj(r, s)
    p = s.copy()
    it = 0
    while it < max_iter:
        q, qq = fwd(p)
        if qq == 0.0 or gamma == 0.0:
            break
        alpha = gamma / qq
        worst = _step(d, p, r, q, alpha)
        it += 1
        if worst <= atol:
            # the recursive residual drifts; confirm against the true one
            q, _ = fwd(d)
            r = r0 - q
            if np.max(np.abs(r)) <= atol:
                break
            gamma = adj(r, s)
            p = s.copy()
            continue
        gamma_new = adj(r, s)
        _update_direction(p, s, gamma_new / gamma)
        gamma = gamma_new
    return np.fft.fftshift(d.reshape(shape[1:]), axes=op.img_axes), it
