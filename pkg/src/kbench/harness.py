"""Benchmark orchestration: dataset -> undersample -> reconstruct -> segment
-> evaluate -> statistics -> report.

A run is fully determined by its JSON config. Work is split into
``(case, accel, method)`` tasks that share only read-only inputs (cases,
masks) and return their own result record; aggregation happens after all
tasks finish, on records sorted by key. Output bytes therefore do not
depend on the worker count.

Config schema (``schema_version`` 1)::

    {
      "schema_version": 1,
      "seed": 0,
      "dataset": {"phantom": {"n": 30, "shape": [64, 64], "coils": 4}}
                 | {"external": {"path": "cases/"}},
      "accels": [4, 8, 16, 32],
      "acs": "auto",
      "methods": [{"name": "zero_filled"}, {"name": "cs", "params": {...}},
                  {"name": "unrolled"}],
      "baseline_method": "zero_filled",
      "segmenter": {"threshold": "phantom"}
                   | {"threshold": {"bands": [[label, lo, hi], ...]}}
                   | {"external": {"path": "predictions/"}},
          # predictions/<case_id>/<method name>/R<accel>/segmentation,
          # the layout a run with save_recons writes under recons/
      "alternative": "two_sided",
      "alpha": 0.01,
      "parallelism": 1,
      "save_recons": false,
      "output_dir": "run/"
    }
"""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from kbench.coil import ACQ_2D, ACQ_3D, KSpaceData, SensitivityMaps, expand
from kbench.container import ContainerError, read_container, write_container
from kbench.fourier import fft_centered
from kbench.metrics import MetricsReport, evaluate_case
from kbench.operator import ForwardOperator, kspace_residual
from kbench.phantom import CLASSES, LEVELS, PhantomCase, make_dataset
from kbench.recon import METHODS, CsConfig, UnrolledConfig, cs_reconstruct, reconstruct
from kbench.rng import derive_seed
from kbench.sampling import SamplingMask, apply_mask, poisson_mask
from kbench.segment import (SegmentationMap, bands_from_levels, load_segmentation,
                            normalize_intensity, save_segmentation, threshold_segment)
from kbench.stats import (ALTERNATIVES, PairedSample, significance_star, spearman,
                          wilcoxon_signed_rank)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
THREADS_ENV = "KBENCH_THREADS"
REPORT = "report.json"
PLOT_FILES = ("dice_vs_accel.csv", "ssim_vs_accel.csv", "psnr_vs_dice_scatter.csv")
MAX_ACS = 24

_TOP_KEYS = {"schema_version", "seed", "dataset", "accels", "acs", "methods", "baseline_method",
             "segmenter", "alternative", "alpha", "parallelism", "save_recons", "output_dir"}
_METHOD_PARAMS = {"cs": CsConfig, "unrolled": UnrolledConfig}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class MethodSpec:
    name: str
    method: str
    params: dict = field(default_factory=dict)

    def build(self):
        cls = _METHOD_PARAMS.get(self.method)
        return cls(**self.params) if cls else None

    def to_dict(self) -> dict:
        return {"name": self.name, "method": self.method, "params": self.params}


@dataclass
class BenchConfig:
    dataset: dict
    accels: list[float]
    methods: list[MethodSpec]
    baseline_method: str
    segmenter: dict = field(default_factory=lambda: {"threshold": "phantom"})
    seed: int = 0
    acs: int | str = "auto"
    alternative: str = "two_sided"
    alpha: float = 0.01
    parallelism: int = 1
    save_recons: bool = False
    output_dir: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        unknown = sorted(set(raw) - _TOP_KEYS)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version!r}; expected {SCHEMA_VERSION}")
        seed = _int(raw.get("seed", 0), "seed")
        cfg = cls(
            dataset=_check_dataset(raw.get("dataset"), seed),
            accels=_check_accels(raw.get("accels")),
            methods=_check_methods(raw.get("methods")),
            baseline_method="",
            segmenter=_check_segmenter(raw.get("segmenter", {"threshold": "phantom"})),
            seed=seed,
            acs=_check_acs(raw.get("acs", "auto")),
            alternative=raw.get("alternative", "two_sided"),
            alpha=float(raw.get("alpha", 0.01)),
            parallelism=_int(raw.get("parallelism", 1), "parallelism"),
            save_recons=bool(raw.get("save_recons", False)),
            output_dir=raw.get("output_dir"),
        )
        names = [m.name for m in cfg.methods]
        default_base = "zero_filled" if "zero_filled" in names else names[0]
        cfg.baseline_method = raw.get("baseline_method", default_base)
        if cfg.baseline_method not in names:
            raise ConfigError(f"baseline_method {cfg.baseline_method!r} is not among methods {names}")
        if cfg.alternative not in ALTERNATIVES:
            raise ConfigError(f"alternative must be one of {ALTERNATIVES}, got {cfg.alternative!r}")
        if not 0 < cfg.alpha < 1:
            raise ConfigError(f"alpha must lie in (0, 1), got {cfg.alpha}")
        if cfg.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {cfg.parallelism}")
        return cfg

    @classmethod
    def load(cls, path) -> "BenchConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"{path}: no such config file") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return cls.from_dict(raw)

    def to_dict(self, runtime: bool = True) -> dict:
        """JSON form; ``runtime=False`` drops fields that must not affect
        results (output location, worker count)."""
        out = {
            "schema_version": SCHEMA_VERSION,
            "seed": self.seed,
            "dataset": self.dataset,
            "accels": self.accels,
            "acs": self.acs,
            "methods": [m.to_dict() for m in self.methods],
            "baseline_method": self.baseline_method,
            "segmenter": self.segmenter,
            "alternative": self.alternative,
            "alpha": self.alpha,
            "save_recons": self.save_recons,
        }
        if runtime:
            out["parallelism"] = self.parallelism
            out["output_dir"] = self.output_dir
        return copy.deepcopy(out)


def _int(v, name) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    return v


def _check_dataset(ds, seed) -> dict:
    if not isinstance(ds, dict) or len(ds) != 1 or next(iter(ds)) not in ("phantom", "external"):
        raise ConfigError("dataset must be {'phantom': {...}} or {'external': {'path': ...}}")
    kind, body = next(iter(ds.items()))
    if not isinstance(body, dict):
        raise ConfigError(f"dataset.{kind} must be an object")
    if kind == "external":
        if not isinstance(body.get("path"), str):
            raise ConfigError("dataset.external.path must be a string")
        return {"external": {"path": body["path"]}}
    unknown = sorted(set(body) - {"n", "shape", "coils", "seed", "jitter", "noise_std"})
    if unknown:
        raise ConfigError(f"unknown dataset.phantom keys: {unknown}")
    n = _int(body.get("n", 10), "dataset.phantom.n")
    shape = body.get("shape", [64, 64])
    if (not isinstance(shape, list) or len(shape) not in (2, 3)
            or not all(isinstance(s, int) and s >= 32 for s in shape)):
        raise ConfigError(f"dataset.phantom.shape must list 2 or 3 integers >= 32, got {shape!r}")
    coils = _int(body.get("coils", 4), "dataset.phantom.coils")
    if n < 1 or coils < 1:
        raise ConfigError("dataset.phantom.n and coils must be >= 1")
    return {"phantom": {"n": n, "shape": shape, "coils": coils,
                        "seed": _int(body.get("seed", seed), "dataset.phantom.seed"),
                        "jitter": float(body.get("jitter", 0.03)),
                        "noise_std": float(body.get("noise_std", 0.0))}}


def _check_accels(accels) -> list[float]:
    if not isinstance(accels, list) or not accels:
        raise ConfigError("accels must be a non-empty list")
    out = []
    for a in accels:
        if isinstance(a, bool) or not isinstance(a, (int, float)) or not a > 1:
            raise ConfigError(f"every acceleration must be a number > 1, got {a!r}")
        out.append(float(a))
    if len(set(out)) != len(out):
        raise ConfigError("accels contains duplicates")
    return out


def _check_methods(methods) -> list[MethodSpec]:
    if not isinstance(methods, list) or not methods:
        raise ConfigError("methods must be a non-empty list")
    specs = []
    for m in methods:
        if isinstance(m, str):
            m = {"name": m}
        if not isinstance(m, dict) or "name" not in m:
            raise ConfigError(f"method entries need a name, got {m!r}")
        method = m.get("method", m["name"])
        if method not in METHODS:
            raise ConfigError(f"unknown method {method!r}; choose from {METHODS}")
        params = m.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError(f"params of {m['name']!r} must be an object")
        spec = MethodSpec(str(m["name"]), method, params)
        try:
            spec.build()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid params for method {spec.name!r}: {exc}") from None
        if method == "zero_filled" and params:
            raise ConfigError("zero_filled takes no params")
        specs.append(spec)
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ConfigError(f"method names must be unique, got {names}")
    return specs


def _check_segmenter(seg) -> dict:
    if not isinstance(seg, dict) or len(seg) != 1:
        raise ConfigError("segmenter must be {'threshold': ...} or {'external': {'path': ...}}")
    kind, body = next(iter(seg.items()))
    if kind == "external":
        if not isinstance(body, dict) or not isinstance(body.get("path"), str):
            raise ConfigError("segmenter.external.path must be a string")
        return {"external": {"path": body["path"]}}
    if kind != "threshold":
        raise ConfigError(f"unknown segmenter {kind!r}")
    if body == "phantom":
        return {"threshold": "phantom"}
    if not isinstance(body, dict) or not isinstance(body.get("bands"), list):
        raise ConfigError("segmenter.threshold must be 'phantom' or {'bands': [[label, lo, hi], ...]}")
    bands = []
    for b in body["bands"]:
        if not isinstance(b, list) or len(b) != 3:
            raise ConfigError(f"band entries must be [label, lo, hi], got {b!r}")
        bands.append([int(b[0]), float(b[1]), float(b[2]) if b[2] is not None else math.inf])
    out = {"bands": [[b[0], b[1], None if math.isinf(b[2]) else b[2]] for b in bands]}
    if "classes" in body:
        out["classes"] = {str(k): str(v) for k, v in body["classes"].items()}
    try:
        threshold_segment(np.zeros((1, 1)), [tuple(b) for b in bands])
    except ValueError as exc:
        raise ConfigError(f"invalid threshold bands: {exc}") from None
    return {"threshold": out}


def _check_acs(acs):
    if acs == "auto":
        return acs
    acs = _int(acs, "acs")
    if acs < 0:
        raise ConfigError("acs must be >= 0 or 'auto'")
    return acs


def resolve_threads(cli_threads: int | None = None, configured: int = 1) -> int:
    """Worker count: explicit argument, then ``KBENCH_THREADS``, then config."""
    if cli_threads is not None:
        n = cli_threads
    elif os.environ.get(THREADS_ENV):
        try:
            n = int(os.environ[THREADS_ENV])
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {os.environ[THREADS_ENV]!r}") from None
    else:
        n = configured
    if n < 1:
        raise ConfigError(f"thread count must be >= 1, got {n}")
    return n


# -- data ------------------------------------------------------------------


def auto_acs(shape, accel: float, cap: int = MAX_ACS) -> int:
    """Largest even ACS width <= ``cap`` whose block uses at most half the
    sample budget ``total / accel``."""
    total = int(np.prod(shape))
    side = int(math.sqrt(total / (2.0 * accel)))
    side -= side % 2
    return max(0, min(cap, side, min(shape) - 2))


def save_case(case: PhantomCase, path) -> Path:
    """Write a case as containers ``image``, ``maps``, ``kspace``,
    ``segmentation`` under ``path``; the layout external datasets use."""
    path = Path(path)
    axes = ["z", "y", "x"][-case.ndim:]
    write_container(path / "image", case.gt_image.astype(np.float32), "image", axes=axes)
    write_container(path / "maps", case.maps.maps, "maps", axes=["coil"] + axes, coils=case.maps.coil_count)
    write_container(path / "kspace", case.full_kspace.data, "kspace", axes=["coil"] + axes,
                    coils=case.maps.coil_count, attrs={"mode": case.full_kspace.acquisition_mode})
    save_segmentation(case.gt_seg, path / "segmentation")
    return path


def load_case(path, case_id: str | None = None) -> PhantomCase:
    """Read a case directory written by :func:`save_case` (``kspace`` is
    optional and simulated from image and maps when absent)."""
    path = Path(path)
    image, _ = read_container(path / "image")
    image = np.asarray(image)
    maps_arr, _ = read_container(path / "maps")
    maps = SensitivityMaps(maps_arr.astype(np.complex128))
    if maps.spatial_shape != image.shape:
        raise ContainerError(f"{path}: maps {maps.spatial_shape} do not match image {image.shape}")
    seg = load_segmentation(path / "segmentation", image.shape)
    mode = ACQ_2D if image.ndim == 2 else ACQ_3D
    if (path / "kspace").exists():
        ksp, _ = read_container(path / "kspace")
        if ksp.shape != maps.maps.shape:
            raise ContainerError(f"{path}: kspace {ksp.shape} does not match maps {maps.maps.shape}")
        ksp = ksp.astype(np.complex128)
    else:
        ksp = fft_centered(expand(image.astype(np.complex128), maps), image.ndim)
    gt = np.abs(image).astype(np.float64) if np.iscomplexobj(image) else image.astype(np.float64)
    return PhantomCase(gt, seg, maps, KSpaceData(ksp, mode), case_id or path.name, None)


def load_dataset(cfg: BenchConfig) -> list[PhantomCase]:
    if "phantom" in cfg.dataset:
        p = cfg.dataset["phantom"]
        return make_dataset(p["n"], tuple(p["shape"]), p["coils"], p["seed"], p["jitter"], p["noise_std"])
    root = Path(cfg.dataset["external"]["path"])
    if not root.is_dir():
        raise ConfigError(f"external dataset {root} is not a directory")
    dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if not dirs:
        raise ConfigError(f"external dataset {root} contains no case directories")
    return [load_case(d) for d in dirs]


def make_masks(cfg: BenchConfig, image_shape) -> dict[float, SamplingMask]:
    """One mask per acceleration shared by every case. 3D volumes are
    undersampled in the two phase-encode axes (the last two) with a fully
    sampled readout."""
    mshape = tuple(image_shape[-2:])
    masks = {}
    for accel in cfg.accels:
        acs = auto_acs(mshape, accel) if cfg.acs == "auto" else cfg.acs
        masks[accel] = poisson_mask(mshape, accel, acs, derive_seed(cfg.seed, "mask", accel))
    return masks


# -- per-task compute --------------------------------------------------------


def _segmenter(cfg: BenchConfig):
    seg = cfg.segmenter
    if "external" in seg:
        root = Path(seg["external"]["path"])

        def external(img, case, method, accel):
            return load_segmentation(root / case.case_id / method / f"R{accel:g}" / "segmentation",
                                     img.shape)

        return external
    body = seg["threshold"]
    if body == "phantom":
        bands, classes = bands_from_levels(LEVELS), dict(CLASSES)
    else:
        bands = [(b[0], b[1], math.inf if b[2] is None else b[2]) for b in body["bands"]]
        classes = {int(k): v for k, v in body.get("classes", {}).items()} or None

    def threshold(img, case, method, accel):
        return threshold_segment(normalize_intensity(img), bands, classes or case.gt_seg.classes)

    return threshold


def _task(case: PhantomCase, spec: MethodSpec, accel: float, mask: SamplingMask, segmenter,
          recon_dir: Path | None) -> dict:
    A = ForwardOperator(mask, case.maps, case.ndim)
    y = apply_mask(case.full_kspace, mask).data
    extra = {}
    if spec.method == "cs":
        x, trace = cs_reconstruct(A, y, spec.build())
        obj = np.asarray(trace.objective)
        tail = np.diff(obj[10:]) if len(obj) > 11 else np.zeros(0)
        extra["cs_iterations"] = trace.iteration[-1]
        extra["cs_converged"] = trace.converged
        extra["cs_max_increase_after_10"] = float(tail.max()) if tail.size else 0.0
    else:
        x = reconstruct(spec.method, A, y, spec.build())
    extra["kspace_residual"] = kspace_residual(A, x, y)
    pred = segmenter(x, case, spec.name, accel)
    row = evaluate_case(x, case.gt_image, pred, case.gt_seg, case.case_id, spec.name, accel)
    row.extra = extra
    if recon_dir is not None:
        base = recon_dir / case.case_id / spec.name / f"R{accel:g}"
        write_container(base / "image", x, "image")
        save_segmentation(pred, base / "segmentation")
    return row


# -- statistics --------------------------------------------------------------


def significance_table(metrics: MetricsReport, cfg: BenchConfig) -> list[dict]:
    """Wilcoxon of each method's mean Dice against the baseline, per accel."""
    groups = metrics.groups()
    out = []
    for spec in cfg.methods:
        if spec.name == cfg.baseline_method:
            continue
        for accel in cfg.accels:
            base = {r.case_id: r.mean_dice for r in groups.get((cfg.baseline_method, accel), [])}
            cand = {r.case_id: r.mean_dice for r in groups.get((spec.name, accel), [])}
            common = sorted(set(base) & set(cand))
            entry = {"method": spec.name, "accel": accel, "baseline": cfg.baseline_method,
                     "alternative": cfg.alternative, "alpha": cfg.alpha, "n": len(common)}
            if not common:
                entry.update(p_value=None, star=False, note="no paired cases")
                out.append(entry)
                continue
            sample = PairedSample.from_mappings({k: base[k] for k in common}, {k: cand[k] for k in common})
            res = wilcoxon_signed_rank(sample, cfg.alternative)
            entry.update(
                statistic=res.statistic,
                p_value=res.p_value,
                p_two_sided=wilcoxon_signed_rank(sample, "two_sided").p_value,
                p_greater=wilcoxon_signed_rank(sample, "greater").p_value,
                n_nonzero=res.n_nonzero,
                test=res.method,
                median_difference=res.median_difference,
                star=significance_star(res.p_value, cfg.alpha, res.median_difference),
                warning=res.warning,
            )
            out.append(entry)
    return out


def correlation_table(metrics: MetricsReport) -> list[dict]:
    """Spearman(PSNR, mean Dice) over cases within each (method, accel)."""
    out = []
    for (method, accel), rows in metrics.groups().items():
        pairs = [(r.psnr_db, r.mean_dice) for r in rows if math.isfinite(r.psnr_db)]
        entry = {"method": method, "accel": accel, "n": len(pairs)}
        try:
            res = spearman([p for p, _ in pairs], [d for _, d in pairs])
            entry.update(rho=res.rho, p_value=res.p_value, test=res.method)
        except ValueError as exc:
            entry.update(rho=None, p_value=None, note=str(exc))
        out.append(entry)
    return out


# -- report ------------------------------------------------------------------


@dataclass
class BenchReport:
    data: dict
    output_dir: Path | None = None

    @property
    def failures(self) -> list[dict]:
        return self.data["failures"]

    @property
    def rows(self) -> list[dict]:
        return self.data["rows"]

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True, allow_nan=False) + "\n"

    def aggregate(self, method: str, accel: float, key: str = "mean_dice") -> dict:
        for entry in self.data["aggregates"]:
            if entry["method"] == method and entry["accel"] == accel:
                return entry[key]
        raise KeyError((method, accel))


def run_benchmark(cfg: BenchConfig, threads: int | None = None, output_dir=None,
                  figures: bool = False) -> BenchReport:
    """Execute every ``(case, accel, method)`` task and assemble the report.

    Task failures are recorded with their reason and the run continues.
    """
    n_threads = resolve_threads(threads, cfg.parallelism)
    out_dir = Path(output_dir or cfg.output_dir) if (output_dir or cfg.output_dir) else None
    cases = load_dataset(cfg)
    shapes = {c.gt_image.shape for c in cases}
    if len(shapes) != 1:
        raise ConfigError(f"all cases must share one image shape, found {sorted(shapes)}")
    masks = make_masks(cfg, cases[0].gt_image.shape)
    segmenter = _segmenter(cfg)
    recon_dir = out_dir / "recons" if (out_dir is not None and cfg.save_recons) else None

    tasks = [(case, spec, accel) for case in cases for accel in cfg.accels for spec in cfg.methods]

    def work(task):
        case, spec, accel = task
        try:
            return _task(case, spec, accel, masks[accel], segmenter, recon_dir), None
        except Exception as exc:  # noqa: BLE001 - isolated per task by contract
            logger.warning("task %s/%s/R%g failed: %s", case.case_id, spec.name, accel, exc)
            return None, {"case_id": case.case_id, "method": spec.name, "accel": accel,
                          "error": f"{type(exc).__name__}: {exc}"}

    logger.info("running %d tasks on %d thread(s)", len(tasks), n_threads)
    if n_threads == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            results = list(pool.map(work, tasks))

    metrics = MetricsReport([r for r, _ in results if r is not None])
    failures = sorted((f for _, f in results if f is not None),
                      key=lambda f: (f["method"], f["accel"], f["case_id"]))
    data = {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_dict(runtime=False),
        "cases": sorted(c.case_id for c in cases),
        "masks": [{"accel": a, "achieved_accel": masks[a].accel, "acs_size": masks[a].acs_size,
                   "seed": masks[a].seed, "shape": list(masks[a].keep.shape)} for a in cfg.accels],
        "rows": [r.to_dict() for r in metrics.sorted_rows()],
        "failures": failures,
        "aggregates": metrics.aggregates(),
        "significance": significance_table(metrics, cfg),
        "correlation": correlation_table(metrics),
    }
    report = BenchReport(_jsonable(data), out_dir)
    if out_dir is not None:
        write_report(report, out_dir, metrics, figures=figures)
    return report


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report(report: BenchReport, out_dir, metrics: MetricsReport | None = None,
                 figures: bool = False) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT).write_text(report.to_json())
    written = [out_dir / REPORT]
    if metrics is not None:
        metrics.to_csv(out_dir / "per_case.csv")
        written.append(out_dir / "per_case.csv")
    written += emit_plot_data(report.data, out_dir)
    if figures:
        from kbench.plotting import render_figures

        written += render_figures(out_dir, out_dir)
    return written


def load_report(path) -> dict:
    path = Path(path)
    if path.is_dir():
        path = path / REPORT
    try:
        return json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"{path}: no report found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _num(v) -> str:
    if v is None:
        return "inf"
    return repr(float(v)) if isinstance(v, float) else str(v)


def emit_plot_data(report: dict, out_dir) -> list[Path]:
    """Write the plot-ready CSVs.

    ``dice_vs_accel.csv`` and ``ssim_vs_accel.csv``: ``method,accel,n,mean,std``
    (one row per method and acceleration). ``psnr_vs_dice_scatter.csv``:
    ``case_id,method,accel,psnr_db,mean_dice`` (one row per evaluated task;
    an exact reconstruction has ``psnr_db = inf``). Also
    ``significance.csv`` and ``correlation.csv`` mirroring the report.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, key in (("dice_vs_accel.csv", "mean_dice"), ("ssim_vs_accel.csv", "ssim")):
        p = out_dir / name
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["method", "accel", "n", "mean", "std"])
            for e in report["aggregates"]:
                w.writerow([e["method"], _num(e["accel"]), e["n"], _num(e[key]["mean"]), _num(e[key]["std"])])
        paths.append(p)
    p = out_dir / "psnr_vs_dice_scatter.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "method", "accel", "psnr_db", "mean_dice"])
        for r in report["rows"]:
            w.writerow([r["case_id"], r["method"], _num(r["accel"]), _num(r["psnr_db"]), _num(r["mean_dice"])])
    paths.append(p)
    p = out_dir / "significance.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        cols = ["method", "accel", "baseline", "alternative", "n", "statistic", "p_value",
                "p_two_sided", "p_greater", "median_difference", "star"]
        w.writerow(cols)
        for e in report["significance"]:
            w.writerow(["" if e.get(c) is None else _num(e.get(c)) for c in cols])
    paths.append(p)
    p = out_dir / "correlation.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["method", "accel", "n", "rho", "p_value"])
        for e in report["correlation"]:
            w.writerow([e["method"], _num(e["accel"]), e["n"],
                        "" if e.get("rho") is None else _num(e["rho"]),
                        "" if e.get("p_value") is None else _num(e["p_value"])])
    paths.append(p)
    return paths


def read_scatter(path) -> list[dict]:
    """Parse ``psnr_vs_dice_scatter.csv`` back into typed rows."""
    with open(path, newline="") as fh:
        return [{"case_id": r["case_id"], "method": r["method"], "accel": float(r["accel"]),
                 "psnr_db": float(r["psnr_db"]), "mean_dice": float(r["mean_dice"])}
                for r in csv.DictReader(fh)]
