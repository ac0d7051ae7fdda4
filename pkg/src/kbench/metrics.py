"""Segmentation and reconstruction quality: per-class Dice, PSNR and SSIM.

Image metrics operate on magnitudes with a data range taken from the
ground truth (``max - min``). SSIM uses the canonical constants: Gaussian
window of 11 taps per axis with sigma 1.5, ``K1 = 0.01``, ``K2 = 0.03``,
evaluated only where the window fits entirely inside the image.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from kbench.segment import SegmentationMap
from kbench.stats import aggregate

WIN_SIZE = 11
WIN_SIGMA = 1.5
K1 = 0.01
K2 = 0.03


def _labels(seg) -> np.ndarray:
    return seg.labels if isinstance(seg, SegmentationMap) else np.asarray(seg)


def dice(pred, gt, label: int) -> float:
    """``2|P & G| / (|P| + |G|)`` for one label; two empty sets score 1.0."""
    p, g = _labels(pred), _labels(gt)
    if p.shape != g.shape:
        raise ValueError(f"segmentation shapes differ: {p.shape} vs {g.shape}")
    p, g = p == label, g == label
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, g).sum()) / total


def dice_per_class(pred, gt, classes=None) -> dict[int, float]:
    """Dice for every declared foreground class (``gt.classes`` by default)."""
    if classes is None:
        if not isinstance(gt, SegmentationMap):
            raise ValueError("classes must be given for plain label arrays")
        classes = gt.classes
    return {int(k): dice(pred, gt, int(k)) for k in sorted(classes)}


def _pair(pred, gt) -> tuple[np.ndarray, np.ndarray]:
    x = np.abs(np.asarray(getattr(pred, "data", pred))).astype(np.float64)
    y = np.abs(np.asarray(getattr(gt, "data", gt))).astype(np.float64)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    return x, y


def _data_range(gt: np.ndarray, data_range) -> float:
    if data_range is None:
        data_range = float(gt.max() - gt.min())
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}")
    return float(data_range)


def psnr(pred, gt, data_range: float | None = None) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` when the images agree exactly."""
    x, y = _pair(pred, gt)
    rng = _data_range(y, data_range)
    mse = float(np.mean((x - y) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(rng**2 / mse)


def gaussian_window(size: int = WIN_SIZE, sigma: float = WIN_SIGMA) -> np.ndarray:
    """Normalized 1D Gaussian taps; the nD window is their outer product."""
    t = np.arange(size) - (size - 1) / 2.0
    w = np.exp(-0.5 * (t / sigma) ** 2)
    return w / w.sum()


def _filter_valid(img: np.ndarray, taps: np.ndarray) -> np.ndarray:
    half = len(taps) // 2
    out = img
    for ax in range(img.ndim):
        out = ndimage.correlate1d(out, taps, axis=ax, mode="constant")
    crop = tuple(slice(half, n - half) for n in img.shape)
    return out[crop]


def ssim_map(pred, gt, data_range: float | None = None, win_size: int = WIN_SIZE,
             sigma: float = WIN_SIGMA, k1: float = K1, k2: float = K2) -> np.ndarray:
    """Local SSIM at every position where the window fits."""
    x, y = _pair(pred, gt)
    if win_size % 2 == 0:
        raise ValueError("win_size must be odd")
    if min(x.shape) < win_size:
        raise ValueError(f"image shape {x.shape} smaller than the {win_size}-tap SSIM window")
    rng = _data_range(y, data_range)
    taps = gaussian_window(win_size, sigma)
    mx, my = _filter_valid(x, taps), _filter_valid(y, taps)
    vx = _filter_valid(x * x, taps) - mx * mx
    vy = _filter_valid(y * y, taps) - my * my
    cxy = _filter_valid(x * y, taps) - mx * my
    c1, c2 = (k1 * rng) ** 2, (k2 * rng) ** 2
    num = (2.0 * mx * my + c1) * (2.0 * cxy + c2)
    den = (mx * mx + my * my + c1) * (vx + vy + c2)
    return num / den


def ssim(pred, gt, data_range: float | None = None, **params) -> float:
    """Mean structural similarity; 2D or volumetric 3D."""
    return float(np.mean(ssim_map(pred, gt, data_range, **params)))


@dataclass
class CaseMetrics:
    case_id: str
    method: str
    accel: float
    dice_per_class: dict[int, float]
    mean_dice: float
    ssim: float
    psnr_db: float
    extra: dict = field(default_factory=dict)

    @property
    def psnr_infinite(self) -> bool:
        return math.isinf(self.psnr_db)

    def to_dict(self) -> dict:
        row = {
            "case_id": self.case_id,
            "method": self.method,
            "accel": self.accel,
            "dice_per_class": {str(k): v for k, v in self.dice_per_class.items()},
            "mean_dice": self.mean_dice,
            "ssim": self.ssim,
            "psnr_db": None if self.psnr_infinite else self.psnr_db,
            "psnr_infinite": self.psnr_infinite,
        }
        row.update(self.extra)
        return row


def evaluate_case(recon, gt_img, pred_seg: SegmentationMap, gt_seg: SegmentationMap,
                  case_id: str = "", method: str = "", accel: float = 1.0,
                  data_range: float | None = None) -> CaseMetrics:
    """All metrics for one reconstruction and its segmentation.

    Image metrics compare ``|recon|`` against ``|gt_img|``; mean Dice is the
    unweighted mean over the ground-truth foreground classes.
    """
    gt_seg.check_pair(_labels(pred_seg).shape)
    per_class = dice_per_class(pred_seg, gt_seg)
    return CaseMetrics(
        case_id=case_id,
        method=method,
        accel=float(accel),
        dice_per_class=per_class,
        mean_dice=float(np.mean(list(per_class.values()))),
        ssim=ssim(recon, gt_img, data_range),
        psnr_db=psnr(recon, gt_img, data_range),
    )


CSV_FIELDS = ["case_id", "method", "accel", "mean_dice", "ssim", "psnr_db"]


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


@dataclass
class MetricsReport:
    """Per-case rows plus per-(method, accel) aggregates recomputed on demand."""

    rows: list[CaseMetrics] = field(default_factory=list)

    def sorted_rows(self) -> list[CaseMetrics]:
        return sorted(self.rows, key=lambda r: (r.method, r.accel, r.case_id))

    def groups(self) -> dict[tuple[str, float], list[CaseMetrics]]:
        out: dict[tuple[str, float], list[CaseMetrics]] = {}
        for row in self.sorted_rows():
            out.setdefault((row.method, row.accel), []).append(row)
        return out

    def aggregates(self) -> list[dict]:
        result = []
        for (method, accel), rows in self.groups().items():
            entry = {"method": method, "accel": accel, "n": len(rows)}
            for key in ("mean_dice", "ssim", "psnr_db"):
                values = [getattr(r, key) for r in rows]
                finite = [v for v in values if math.isfinite(v)]
                if finite:
                    agg = aggregate(finite)
                    entry[key] = {"mean": agg.mean, "std": agg.std, "n": agg.n}
                else:
                    entry[key] = {"mean": None, "std": None, "n": 0}
                if len(finite) != len(values):
                    entry[key]["n_infinite"] = len(values) - len(finite)
            labels = sorted({k for r in rows for k in r.dice_per_class})
            entry["dice_per_class"] = {}
            for label in labels:
                agg = aggregate([r.dice_per_class[label] for r in rows if label in r.dice_per_class])
                entry["dice_per_class"][str(label)] = {"mean": agg.mean, "std": agg.std}
            result.append(entry)
        return result

    def to_csv(self, path) -> None:
        rows = self.sorted_rows()
        labels = sorted({k for r in rows for k in r.dice_per_class})
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_FIELDS + [f"dice_{k}" for k in labels])
            for r in rows:
                writer.writerow([r.case_id, r.method, _fmt(r.accel), _fmt(r.mean_dice), _fmt(r.ssim),
                                 _fmt(r.psnr_db)] + [_fmt(r.dice_per_class.get(k, float("nan"))) for k in labels])

    def to_json(self, path=None) -> str:
        text = json.dumps({"rows": [r.to_dict() for r in self.sorted_rows()],
                           "aggregates": self.aggregates()}, indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(text + "\n")
        return text
