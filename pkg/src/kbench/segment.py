"""Baseline intensity-band segmenter and segmentation file I/O."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


@dataclass
class SegmentationMap:
    """Integer labels over the image grid; 0 is background."""

    labels: np.ndarray
    classes: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.dtype.kind not in "iu":
            raise ValueError(f"labels must be integers, got dtype {labels.dtype}")
        self.labels = labels.astype(np.uint16)
        self.classes = {int(k): str(v) for k, v in self.classes.items()}
        if 0 in self.classes:
            raise ValueError("label 0 is reserved for background")
        allowed = set(self.classes) | {0}
        present = set(np.unique(self.labels).tolist())
        extra = sorted(present - allowed)
        if extra:
            raise ValueError(f"label {extra[0]} not among declared classes {sorted(self.classes)}")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.labels.shape

    def check_pair(self, shape, what: str = "image") -> None:
        if tuple(shape) != self.shape:
            raise ValueError(f"segmentation shape {self.shape} does not match {what} shape {tuple(shape)}")


def _check_bands(bands):
    ordered = sorted(bands, key=lambda b: (b[1], b[2]))
    for label, lo, hi in ordered:
        if not lo < hi:
            raise ValueError(f"band for label {label} needs lo < hi, got [{lo}, {hi})")
        if label == 0:
            raise ValueError("bands cannot assign the background label 0")
    for (la, _, hia), (lb, lob, _) in zip(ordered, ordered[1:]):
        if lob < hia:
            raise ValueError(f"bands for labels {la} and {lb} overlap")
    return ordered


def largest_component(mask: np.ndarray) -> np.ndarray:
    lab, n = ndimage.label(mask)
    if n <= 1:
        return mask
    sizes = np.bincount(lab.ravel())[1:]
    # ties resolve to the lowest component index, which is scan-order stable
    return lab == (int(np.argmax(sizes)) + 1)


def threshold_segment(img, bands, classes: dict[int, str] | None = None,
                      largest_cc: bool = False) -> SegmentationMap:
    """Label each voxel by the half-open band ``[lo, hi)`` containing it.

    Parameters
    ----------
    img : array_like
        Real image (magnitude), nominally in [0, 1].
    bands : iterable of (label, lo, hi)
        Non-overlapping intensity bands.
    largest_cc : bool
        Keep only the largest connected component of every label.
    """
    img = np.asarray(img)
    if np.iscomplexobj(img):
        raise ValueError("threshold_segment expects a real image; pass its magnitude")
    ordered = _check_bands(bands)
    labels = np.zeros(img.shape, dtype=np.uint16)
    for label, lo, hi in ordered:
        sel = (img >= lo) & (img < hi)
        if largest_cc and sel.any():
            sel = largest_component(sel)
        labels[sel] = label
    if classes is None:
        classes = {int(label): f"class_{label}" for label, _, _ in ordered}
    return SegmentationMap(labels, classes)


def normalize_intensity(img, percentile: float = 99.9) -> np.ndarray:
    """Scale ``|img|`` so its ``percentile``-th percentile maps to 1.

    Brings reconstructions that lost energy (zero filling scales intensities
    by roughly the sampled fraction) onto the [0, 1] range the bands assume.
    A noiseless phantom is unchanged because its brightest class covers far
    more than 0.1% of the voxels. All-zero images are returned as is.
    """
    mag = np.abs(np.asarray(img)).astype(np.float64)
    scale = float(np.percentile(mag, percentile))
    return mag / scale if scale > 0 else mag


def bands_from_levels(levels: dict[int, float], background: float = 0.0):
    """Bands splitting midway between class intensities (and background).

    The brightest band is open-ended; the darkest class starts halfway up
    from background.
    """
    pts = sorted([(v, k) for k, v in levels.items()])
    values = [background] + [v for v, _ in pts]
    if len(set(values)) != len(values):
        raise ValueError("class intensities must be distinct from each other and background")
    out = []
    for i, (v, label) in enumerate(pts):
        lo = 0.5 * (values[i] + v)
        hi = 0.5 * (v + pts[i + 1][0]) if i + 1 < len(pts) else np.inf
        out.append((label, lo, hi))
    return out


def save_segmentation(seg: SegmentationMap, path) -> None:
    from kbench.container import write_container

    write_container(path, seg.labels, kind="segmentation",
                    attrs={"classes": {str(k): v for k, v in seg.classes.items()}})


def load_segmentation(path, shape=None) -> SegmentationMap:
    from kbench.container import read_container

    data, meta = read_container(path)
    if meta["kind"] != "segmentation":
        raise ValueError(f"{path}: expected a segmentation container, found {meta['kind']!r}")
    classes = {int(k): v for k, v in meta.get("attrs", {}).get("classes", {}).items()}
    try:
        seg = SegmentationMap(data, classes)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
    if shape is not None:
        seg.check_pair(shape)
    return seg
