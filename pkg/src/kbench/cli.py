"""Command line interface.

Exit codes: 0 success, 1 some benchmark tasks failed, 2 usage, config or
input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from kbench.container import ContainerError, read_container, write_container

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default 0)")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (overrides KBENCH_THREADS and the config)")
    common.add_argument("--out", type=Path, default=None, help="output directory or file")
    common.add_argument("-v", "--verbose", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="kbench", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("phantom", parents=[common], help="write a phantom dataset")
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--shape", type=int, nargs="+", default=[64, 64])
    p.add_argument("--coils", type=int, default=4)
    p.add_argument("--jitter", type=float, default=0.03)
    p.add_argument("--noise-std", type=float, default=0.0)

    p = sub.add_parser("mask", parents=[common], help="write a Poisson-disc sampling mask")
    p.add_argument("--shape", type=int, nargs=2, required=True)
    p.add_argument("--accel", type=float, required=True)
    p.add_argument("--acs", default="auto", help="ACS width or 'auto'")

    p = sub.add_parser("recon", parents=[common], help="reconstruct one case")
    p.add_argument("--case", type=Path, required=True, help="case directory")
    p.add_argument("--mask", type=Path, required=True, help="mask container")
    p.add_argument("--method", choices=["zero_filled", "cs", "unrolled"], required=True)
    p.add_argument("--params", default=None, help="method parameters as JSON text or a JSON file")

    p = sub.add_parser("segment", parents=[common], help="threshold-segment an image")
    p.add_argument("--image", type=Path, required=True, help="image container")
    p.add_argument("--bands", default="phantom",
                   help="'phantom' or comma-separated label:lo:hi triples (hi may be 'inf')")
    p.add_argument("--largest-cc", action="store_true")
    p.add_argument("--no-normalize", action="store_true",
                   help="use raw magnitudes instead of scaling the 99.9th percentile to 1")

    p = sub.add_parser("eval", parents=[common], help="metrics for one reconstruction")
    p.add_argument("--recon", type=Path, required=True)
    p.add_argument("--gt-image", type=Path, required=True)
    p.add_argument("--pred-seg", type=Path, required=True)
    p.add_argument("--gt-seg", type=Path, required=True)

    p = sub.add_parser("stats", parents=[common], help="Wilcoxon or Spearman on CSV columns")
    p.add_argument("--test", choices=["wilcoxon", "spearman"], required=True)
    p.add_argument("--csv", type=Path, required=True)
    p.add_argument("--baseline", help="baseline column (wilcoxon)")
    p.add_argument("--candidate", help="candidate column (wilcoxon)")
    p.add_argument("--id-column", default=None, help="case id column (wilcoxon)")
    p.add_argument("--alternative", choices=["two_sided", "greater", "less"], default="two_sided")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--x", help="first column (spearman)")
    p.add_argument("--y", help="second column (spearman)")

    p = sub.add_parser("bench", parents=[common], help="run a benchmark from a JSON config")
    p.add_argument("--config", type=Path, required=True)
    p.add_argument("--no-figures", action="store_true", help="skip PNG rendering")

    p = sub.add_parser("report", parents=[common], help="re-render plot data and figures of a run")
    p.add_argument("--run", type=Path, required=True, help="run directory holding report.json")
    p.add_argument("--no-figures", action="store_true")
    return parser


def _seed(args) -> int:
    return 0 if args.seed is None else args.seed


def _out(args, default: str) -> Path:
    return args.out if args.out is not None else Path(default)


def _params(text):
    if text is None:
        return None
    path = Path(text)
    try:
        raw = json.loads(path.read_text()) if path.is_file() else json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--params is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError("--params must be a JSON object")
    return raw


def cmd_phantom(args) -> int:
    from kbench.harness import save_case
    from kbench.phantom import make_dataset

    out = _out(args, "phantom")
    cases = make_dataset(args.n, tuple(args.shape), args.coils, _seed(args), args.jitter, args.noise_std)
    for case in cases:
        save_case(case, out / case.case_id)
    print(f"wrote {len(cases)} case(s) to {out}")
    return EXIT_OK


def cmd_mask(args) -> int:
    from kbench.harness import auto_acs
    from kbench.sampling import poisson_mask

    shape = tuple(args.shape)
    acs = auto_acs(shape, args.accel) if args.acs == "auto" else int(args.acs)
    mask = poisson_mask(shape, args.accel, acs, _seed(args))
    out = _out(args, "mask")
    write_container(out, mask.keep, "mask", dtype="u8", axes=["ky", "kx"],
                    attrs={"requested_accel": args.accel, "achieved_accel": mask.accel,
                           "acs_size": acs, "seed": _seed(args)})
    print(json.dumps({"achieved_accel": mask.accel, "acs_size": acs, "path": str(out)}))
    return EXIT_OK


def _load_mask(path):
    from kbench.sampling import SamplingMask

    keep, meta = read_container(path)
    if meta["kind"] != "mask":
        raise UsageError(f"{path}: expected a mask container, found {meta['kind']!r}")
    attrs = meta.get("attrs", {})
    return SamplingMask(keep.astype(np.uint8), int(attrs.get("acs_size", 0)),
                        float(attrs.get("requested_accel", 0.0)), int(attrs.get("seed", 0)))


def cmd_recon(args) -> int:
    from kbench.harness import load_case
    from kbench.operator import ForwardOperator, kspace_residual
    from kbench.recon import CsConfig, UnrolledConfig, cs_reconstruct, reconstruct
    from kbench.sampling import apply_mask

    case = load_case(args.case)
    mask = _load_mask(args.mask)
    A = ForwardOperator(mask, case.maps, case.ndim)
    y = apply_mask(case.full_kspace, mask).data
    params = _params(args.params)
    out = _out(args, "recon")
    if args.method == "cs":
        x, trace = cs_reconstruct(A, y, CsConfig(**(params or {})))
        out.mkdir(parents=True, exist_ok=True)
        trace.to_csv(out / "trace.csv")
    else:
        cfg = UnrolledConfig(**params) if (params and args.method == "unrolled") else None
        x = reconstruct(args.method, A, y, cfg)
    residual = kspace_residual(A, x, y)
    write_container(out / "image", x, "image",
                    attrs={"method": args.method, "kspace_residual": residual, "case": case.case_id})
    print(json.dumps({"method": args.method, "kspace_residual": residual, "path": str(out / "image")}))
    return EXIT_OK


def _parse_bands(text):
    from kbench.phantom import LEVELS
    from kbench.segment import bands_from_levels

    if text == "phantom":
        return bands_from_levels(LEVELS)
    bands = []
    for item in text.split(","):
        parts = item.split(":")
        if len(parts) != 3:
            raise UsageError(f"band {item!r} is not label:lo:hi")
        bands.append((int(parts[0]), float(parts[1]), float(parts[2])))
    return bands


def cmd_segment(args) -> int:
    from kbench.phantom import CLASSES
    from kbench.segment import normalize_intensity, save_segmentation, threshold_segment

    img, _ = read_container(args.image)
    bands = _parse_bands(args.bands)
    classes = dict(CLASSES) if args.bands == "phantom" else None
    mag = np.abs(img).astype(np.float64) if args.no_normalize else normalize_intensity(img)
    seg = threshold_segment(mag, bands, classes, args.largest_cc)
    out = _out(args, "segmentation")
    save_segmentation(seg, out)
    counts = {str(k): int(np.count_nonzero(seg.labels == k)) for k in sorted(seg.classes)}
    print(json.dumps({"path": str(out), "voxels_per_class": counts}))
    return EXIT_OK


def cmd_eval(args) -> int:
    from kbench.metrics import evaluate_case
    from kbench.segment import load_segmentation

    recon, _ = read_container(args.recon)
    gt, _ = read_container(args.gt_image)
    if recon.shape != gt.shape:
        raise UsageError(f"shape mismatch: {args.recon} has {recon.shape}, {args.gt_image} has {gt.shape}")
    pred = load_segmentation(args.pred_seg)
    gt_seg = load_segmentation(args.gt_seg)
    if pred.shape != gt_seg.shape:
        raise UsageError(f"shape mismatch: {args.pred_seg} has {pred.shape}, {args.gt_seg} has {gt_seg.shape}")
    if gt_seg.shape != gt.shape:
        raise UsageError(f"shape mismatch: {args.gt_seg} has {gt_seg.shape}, {args.gt_image} has {gt.shape}")
    row = evaluate_case(recon, np.abs(gt).astype(np.float64), pred, gt_seg, case_id=args.recon.name)
    text = json.dumps(row.to_dict(), indent=2, sort_keys=True)
    if args.out is not None:
        args.out.write_text(text + "\n")
    print(text)
    return EXIT_OK


def _read_columns(path: Path) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            return list(csv.DictReader(fh))
    except FileNotFoundError:
        raise UsageError(f"{path}: no such file") from None


def _column(rows, name, path) -> np.ndarray:
    if not rows or name not in rows[0]:
        raise UsageError(f"{path}: no column {name!r}")
    try:
        return np.array([float(r[name]) for r in rows])
    except ValueError as exc:
        raise UsageError(f"{path}: column {name!r}: {exc}") from None


def cmd_stats(args) -> int:
    from kbench.stats import PairedSample, significance_star, spearman, wilcoxon_signed_rank

    rows = _read_columns(args.csv)
    if args.test == "wilcoxon":
        if not (args.baseline and args.candidate):
            raise UsageError("wilcoxon needs --baseline and --candidate")
        b = _column(rows, args.baseline, args.csv)
        c = _column(rows, args.candidate, args.csv)
        ids = [r[args.id_column] for r in rows] if args.id_column else [str(i) for i in range(len(rows))]
        res = wilcoxon_signed_rank(PairedSample(tuple(ids), b, c), args.alternative)
        out = {"test": "wilcoxon", "statistic": res.statistic, "p_value": res.p_value,
               "alternative": res.alternative, "n": res.n, "n_nonzero": res.n_nonzero,
               "method": res.method, "median_difference": res.median_difference,
               "star": significance_star(res.p_value, args.alpha, res.median_difference),
               "warning": res.warning}
    else:
        if not (args.x and args.y):
            raise UsageError("spearman needs --x and --y")
        res = spearman(_column(rows, args.x, args.csv), _column(rows, args.y, args.csv))
        out = {"test": "spearman", "rho": res.rho, "p_value": res.p_value, "n": res.n, "method": res.method}
    text = json.dumps(out, indent=2, sort_keys=True)
    if args.out is not None:
        args.out.write_text(text + "\n")
    print(text)
    return EXIT_OK


def cmd_bench(args) -> int:
    from kbench.harness import BenchConfig, run_benchmark

    cfg = BenchConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or (Path(cfg.output_dir) if cfg.output_dir else Path("run"))
    report = run_benchmark(cfg, threads=args.threads, output_dir=out, figures=not args.no_figures)
    n_fail = len(report.failures)
    print(f"{len(report.rows)} task(s) evaluated, {n_fail} failed; report in {out}")
    for f in report.failures:
        print(f"  failed {f['case_id']} {f['method']} R{f['accel']:g}: {f['error']}", file=sys.stderr)
    return EXIT_FAILURES if n_fail else EXIT_OK


def cmd_report(args) -> int:
    from kbench.harness import emit_plot_data, load_report

    data = load_report(args.run)
    out = args.out or args.run
    written = emit_plot_data(data, out)
    if not args.no_figures:
        from kbench.plotting import render_figures

        written += render_figures(out, out)
    for p in written:
        print(p)
    return EXIT_FAILURES if data.get("failures") else EXIT_OK


COMMANDS = {
    "phantom": cmd_phantom,
    "mask": cmd_mask,
    "recon": cmd_recon,
    "segment": cmd_segment,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "bench": cmd_bench,
    "report": cmd_report,
}


def main(argv=None) -> int:
    from kbench.harness import ConfigError

    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError, ContainerError, ValueError, FileNotFoundError) as exc:
        print(f"kbench {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
