"""Reconstruction methods: zero-filled, compressed sensing (TV + L1-wavelet,
primal-dual) and an unrolled denoise / data-consistency cascade."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from kbench.operator import ForwardOperator, data_consistency, zero_filled
from kbench.transforms import divergence, dwt, gradient, idwt, soft_threshold, tv_value

logger = logging.getLogger(__name__)

METHODS = ("zero_filled", "cs", "unrolled")


class ReconstructionError(RuntimeError):
    """Solver aborted; ``trace`` holds what was computed before the abort."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


@dataclass
class CsConfig:
    lambda_tv: float = 1e-3
    lambda_wav: float = 1e-3
    wavelet: str = "db4"
    levels: int = 3
    max_iters: int = 200
    tol: float = 1e-5
    tau: float | None = None
    sigma: float | None = None
    normalize: bool = True

    def __post_init__(self):
        if self.lambda_tv < 0 or self.lambda_wav < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class UnrolledConfig:
    blocks: int = 6
    denoiser: str | Callable = "wavelet"
    wavelet: str = "db4"
    levels: int = 3
    tau0_factor: float = 2.0
    decay: float = 0.7
    dc_atol: float = 9e-6
    dc_inner_rtol: float = 1e-2
    dc_mode: str = "hard"

    def __post_init__(self):
        if self.blocks < 0:
            raise ValueError(f"blocks must be >= 0, got {self.blocks}")
        if self.tau0_factor < 0 or self.decay < 0:
            raise ValueError("threshold schedule must be nonnegative")
        if self.dc_atol <= 0 or self.dc_inner_rtol <= 0:
            raise ValueError("data-consistency tolerances must be positive")
        if self.dc_mode != "hard":
            raise ValueError(f"only hard data consistency is supported, got {self.dc_mode!r}")


@dataclass
class ConvergenceTrace:
    iteration: list[int] = field(default_factory=list)
    objective: list[float] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    converged: bool = False

    def append(self, it, obj, res):
        self.iteration.append(int(it))
        self.objective.append(float(obj))
        self.residual.append(float(res))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "objective", "residual"])
            for row in zip(self.iteration, self.objective, self.residual):
                writer.writerow([row[0], repr(row[1]), repr(row[2])])


def _fit_levels(shape, levels: int) -> int:
    """Largest level count <= ``levels`` dividing every axis."""
    fit = levels
    while fit > 0 and any(n % (2**fit) for n in shape):
        fit -= 1
    return fit


def normalization_scale(img) -> float:
    """99.9th percentile of ``|img|`` (1.0 for an all-zero image)."""
    scale = float(np.percentile(np.abs(img), 99.9))
    return scale if scale > 0 else 1.0


def cs_objective(A: ForwardOperator, x, y_shifted, cfg: CsConfig, levels: int) -> float:
    op = A.fast
    data = 0.5 * np.sum(np.abs(op.forward(x) - y_shifted) ** 2)
    value = data
    if cfg.lambda_tv:
        value += cfg.lambda_tv * tv_value(x)
    if cfg.lambda_wav and levels:
        value += cfg.lambda_wav * np.sum(np.abs(dwt(x, cfg.wavelet, levels).array))
    return float(value)


def cs_reconstruct(A: ForwardOperator, y, cfg: CsConfig | None = None):
    """Minimize ``0.5|Ax - y|^2 + l_tv TV(x) + l_wav |Psi x|_1``.

    Chambolle-Pock iterations with ``K = [A; grad]``: the data term and TV
    are handled through their dual proximal maps, the wavelet term through
    the exact prox of an orthonormal transform (soft thresholding in the
    wavelet domain). Starts at the zero-filled image.

    Returns
    -------
    x : ndarray
        Final iterate, in the units of ``y``.
    trace : ConvergenceTrace
        Objective and data residual per iteration (iteration 0 is the start).
    """
    cfg = cfg or CsConfig()
    y = np.asarray(getattr(y, "data", y))
    x0 = zero_filled(A, y)
    scale = normalization_scale(x0) if cfg.normalize else 1.0
    op = A.fast
    ys = op.to_kspace(y) * op.keep / scale
    x = x0 / scale
    ndim_img = x.ndim
    levels = _fit_levels(x.shape, cfg.levels) if cfg.lambda_wav else 0
    if cfg.lambda_wav and levels < cfg.levels:
        logger.info("wavelet levels reduced from %d to %d for shape %s", cfg.levels, levels, x.shape)
    # |A| <= 1 by construction, |grad|^2 <= 4 * ndim
    lip = math.sqrt(1.0 + (4.0 * ndim_img if cfg.lambda_tv else 0.0))
    tau = cfg.tau if cfg.tau is not None else 1.0 / lip
    sigma = cfg.sigma if cfg.sigma is not None else 1.0 / lip
    if tau * sigma * lip**2 > 1.0 + 1e-12:
        raise ValueError(f"step sizes violate tau*sigma*L^2 <= 1 (L^2={lip**2:.3g})")

    def prox_primal(v):
        """Returns the prox and, when available, its wavelet coefficients."""
        if not (cfg.lambda_wav and levels):
            return v, None
        c = dwt(v, cfg.wavelet, levels)
        c.array = soft_threshold(c.array, tau * cfg.lambda_wav)
        return idwt(c), c.array

    def objective(x, fx, coeffs):
        value = 0.5 * np.sum(np.abs(fx - ys) ** 2)
        if cfg.lambda_tv:
            value += cfg.lambda_tv * tv_value(x)
        if cfg.lambda_wav and levels:
            if coeffs is None:
                coeffs = dwt(x, cfg.wavelet, levels).array
            value += cfg.lambda_wav * np.sum(np.abs(coeffs))
        return float(value)

    trace = ConvergenceTrace()
    fx = op.forward(x)
    obj0 = objective(x, fx, None)
    trace.append(0, obj0, np.linalg.norm(fx - ys))
    q = np.zeros_like(ys)
    p = np.zeros((ndim_img,) + x.shape, dtype=np.complex128)
    x_bar, fx_bar = x.copy(), fx
    for it in range(1, cfg.max_iters + 1):
        q = (q + sigma * (fx_bar - ys)) / (1.0 + sigma)
        if cfg.lambda_tv:
            p = p + sigma * gradient(x_bar)
            p /= np.maximum(1.0, np.abs(p) / cfg.lambda_tv)
            kt = op.adjoint(q) - divergence(p)
        else:
            kt = op.adjoint(q)
        x_new, coeffs = prox_primal(x - tau * kt)
        if not np.all(np.isfinite(x_new)):
            raise ReconstructionError(f"non-finite iterate at iteration {it}", trace)
        fx_new = op.forward(x_new)
        change = np.linalg.norm(x_new - x) / max(np.linalg.norm(x_new), 1e-30)
        # A is linear, so A(2x' - x) needs no extra transform
        x_bar, fx_bar = 2.0 * x_new - x, 2.0 * fx_new - fx
        x, fx = x_new, fx_new
        obj = objective(x, fx, coeffs)
        trace.append(it, obj, np.linalg.norm(fx - ys))
        if obj > 10.0 * max(obj0, 1e-30):
            raise ReconstructionError(f"objective diverged at iteration {it}", trace)
        if change < cfg.tol:
            trace.converged = True
            break
    return x * scale, trace


def identity_denoiser(x):
    return x


def wavelet_denoiser(tau: float, family: str = "db4", levels: int = 3) -> Callable:
    """Soft-threshold the detail coefficients of ``x`` at ``tau``."""

    def denoise(x):
        fit = _fit_levels(x.shape, levels)
        if fit == 0:
            return x
        c = dwt(x, family, fit)
        detail = c.detail_mask
        c.array[detail] = soft_threshold(c.array[detail], tau)
        return idwt(c)

    return denoise


def median_detail(x, family="db4", levels=3) -> float:
    fit = _fit_levels(x.shape, levels)
    if fit == 0:
        return 0.0
    c = dwt(x, family, fit)
    return float(np.median(np.abs(c.array[c.detail_mask])))


def denoiser_schedule(cfg: UnrolledConfig, x0) -> list[Callable]:
    """One denoiser per block. Named denoisers get the default threshold
    schedule ``tau_k = tau0 * decay**k``, ``tau0 = tau0_factor * median
    |detail(x0)|``; a callable is used unchanged for every block."""
    if callable(cfg.denoiser):
        return [cfg.denoiser] * cfg.blocks
    if cfg.denoiser == "identity":
        return [identity_denoiser] * cfg.blocks
    if cfg.denoiser == "wavelet":
        tau0 = cfg.tau0_factor * median_detail(x0, cfg.wavelet, cfg.levels)
        return [wavelet_denoiser(tau0 * cfg.decay**k, cfg.wavelet, cfg.levels)
                for k in range(cfg.blocks)]
    raise ValueError(f"unknown denoiser {cfg.denoiser!r}")


def unrolled_reconstruct(A: ForwardOperator, y, cfg: UnrolledConfig | None = None):
    """Cascade ``x <- DC(denoise_k(x))`` from the zero-filled image.

    Intermediate projections stop at ``dc_inner_rtol * max|y|``; the last one
    runs to the absolute tolerance ``dc_atol``, so the output matches every
    sampled entry of ``y`` to within ``dc_atol``.
    """
    cfg = cfg or UnrolledConfig()
    y = np.asarray(getattr(y, "data", y))
    x = zero_filled(A, y)
    schedule = denoiser_schedule(cfg, x)
    for k, denoise in enumerate(schedule):
        z = denoise(x)
        if not np.all(np.isfinite(z)):
            raise ReconstructionError(f"non-finite denoiser output in block {k}")
        if k == len(schedule) - 1:
            x = data_consistency(A, z, y, atol=cfg.dc_atol)
        else:
            x = data_consistency(A, z, y, rtol=cfg.dc_inner_rtol)
        if not np.all(np.isfinite(x)):
            raise ReconstructionError(f"non-finite image after block {k}")
    return x


def reconstruct(method: str, A: ForwardOperator, y, config=None):
    """Uniform entry point: ``method`` in ``zero_filled``, ``cs``, ``unrolled``."""
    if method == "zero_filled":
        return zero_filled(A, y)
    if method == "cs":
        if isinstance(config, dict):
            config = CsConfig(**config)
        return cs_reconstruct(A, y, config)[0]
    if method == "unrolled":
        if isinstance(config, dict):
            config = UnrolledConfig(**config)
        return unrolled_reconstruct(A, y, config)
    raise ValueError(f"unknown reconstruction method {method!r}; choose from {METHODS}")
