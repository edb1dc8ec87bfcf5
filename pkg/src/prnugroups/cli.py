"""
Command line entry point.

Exit codes: 0 success, 1 finished but some inputs failed (listed in the
report), 2 usage or fatal error.
"""
import argparse
import csv
import io
import json
import os
import statistics
import sys
import time

import numpy as np

from . import simkit
from .calibration import DEFAULT_GRID, DEFAULT_TRIALS, LabeledPattern, ThresholdTable, calibrate
from .clustering import ClusterConfig, cluster_database, match_against
from .errors import PrnuError
from .filters import (DEFAULT_SIGMA0, FilterConfig, FilterKind, SuppressStrategy,
                      extract_noise)
from .fingerprint import Fingerprint, load_fingerprint, save_fingerprint
from .imaging import DEFAULT_CROP, center_crop, load_image, to_gray_sum
from .pipeline import extract_patterns

IMAGE_EXTENSIONS = (".jpg", ".jpeg", ".png")


class UsageError(Exception):
    pass


def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _crop(s):
    v = int(s)
    if v != 0 and v < 64:
        raise argparse.ArgumentTypeError("--crop must be 0 or >= 64")
    return v


def _margin(s):
    v = float(s)
    if not 0 < v < 0.5:
        raise argparse.ArgumentTypeError("--error-margin must be in (0, 0.5)")
    return v


def _grid(s):
    try:
        vals = [int(x) for x in s.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {s!r}")
    if not vals or min(vals) < 1:
        raise argparse.ArgumentTypeError("grid counts must be positive integers")
    return vals


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--filter", choices=[k.value for k in FilterKind], default="sod")
    shared.add_argument("--sigma0", type=float, default=DEFAULT_SIGMA0)
    shared.add_argument("--suppress", choices=[s.value for s in SuppressStrategy],
                        default="rowcol")
    shared.add_argument("--crop", type=_crop, default=DEFAULT_CROP)
    shared.add_argument("--error-margin", type=_margin, default=0.01)
    shared.add_argument("--block-size", type=_positive_int, default=50)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--threads", type=_positive_int, default=None,
                        help="worker threads (default: all cores)")
    shared.add_argument("--output", "-o", default="-",
                        help="output file or directory ('-' for stdout)")
    shared.add_argument("--format", choices=["json", "csv"], default="json")

    p = argparse.ArgumentParser(prog="prnugroups",
                                description="Camera fingerprints from image sensor noise.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("extract", parents=[shared],
                       help="write one fingerprint file per input image")
    s.add_argument("inputs", nargs="+", help="images, directories or .txt path lists")

    s = sub.add_parser("calibrate", parents=[shared],
                       help="build a threshold table from a labeled sample database")
    s.add_argument("--labels", required=True, help="CSV with header path,camera_id")
    s.add_argument("--grid", type=_grid, default=list(DEFAULT_GRID))
    s.add_argument("--trials", type=int, default=DEFAULT_TRIALS)

    s = sub.add_parser("cluster", parents=[shared], help="group a database by camera")
    s.add_argument("inputs", nargs="+", help="images, directories or .txt path lists")
    s.add_argument("--thresholds", required=True, help="threshold table JSON")
    s.add_argument("--fingerprints-dir", help="also write one fingerprint file per group")

    s = sub.add_parser("match", parents=[shared],
                       help="correlate images against suspect fingerprints")
    s.add_argument("inputs", nargs="+", help="images, directories or .txt path lists")
    s.add_argument("--fingerprints", nargs="+", required=True)
    s.add_argument("--thresholds", required=True)

    s = sub.add_parser("bench", parents=[shared], help="time the three filters")
    s.add_argument("inputs", nargs="*", help="images, directories or .txt path lists")
    s.add_argument("--synthetic", type=int, default=0,
                   help="benchmark on N synthetic images instead of files")
    s.add_argument("--size", type=_positive_int, default=1024)

    s = sub.add_parser("simgen", parents=[shared], help="write a synthetic corpus")
    s.add_argument("--cameras", type=_positive_int, default=10)
    s.add_argument("--images", type=_positive_int, default=20)
    s.add_argument("--size", type=int, default=1024)
    s.add_argument("--strength", type=float, default=0.05)
    s.add_argument("--read-noise", type=float, default=simkit.DEFAULT_READ_NOISE)
    s.add_argument("--common-strength", type=float, default=simkit.DEFAULT_COMMON_STRENGTH)
    return p


def expand_inputs(inputs):
    """Directories expand to their sorted image files; ``.txt`` files list one path per line."""
    paths = []
    for item in inputs:
        if os.path.isdir(item):
            names = sorted(n for n in os.listdir(item)
                           if n.lower().endswith(IMAGE_EXTENSIONS))
            paths.extend(os.path.join(item, n) for n in names)
        elif item.lower().endswith(".txt"):
            with open(item, encoding="utf-8") as fh:
                paths.extend(line.strip() for line in fh if line.strip())
        else:
            paths.append(item)
    return paths


def read_labels(path):
    base = os.path.dirname(os.path.abspath(path))
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"path", "camera_id"} <= set(reader.fieldnames):
            raise UsageError(f"{path}: labels CSV needs a 'path,camera_id' header")
        rows = []
        for row in reader:
            p = row["path"]
            rows.append((p if os.path.isabs(p) else os.path.join(base, p), row["camera_id"]))
    return rows


def filter_config(args):
    return FilterConfig(args.filter, args.sigma0, args.suppress, args.crop)


def cluster_config(args):
    return ClusterConfig(block_size=args.block_size, filter=args.filter,
                         suppress=args.suppress, crop=args.crop, rng_seed=args.seed,
                         error_margin=args.error_margin, sigma0=args.sigma0)


def _emit(args, text):
    if args.output == "-":
        sys.stdout.write(text)
    else:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)


def _dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _skipped(skipped):
    return [{"path": p, "error": e} for p, e in skipped]


def cmd_extract(args):
    if args.output == "-":
        raise UsageError("extract needs --output DIR for the fingerprint files")
    os.makedirs(args.output, exist_ok=True)
    cfg = filter_config(args)
    patterns, skipped = extract_patterns(expand_inputs(args.inputs), cfg, args.threads)
    written, used = [], set()
    for path, pat in patterns:
        stem = os.path.splitext(os.path.basename(path))[0]
        name, k = stem, 1
        while name in used:
            name, k = f"{stem}_{k}", k + 1
        used.add(name)
        out = os.path.join(args.output, name + ".prnu")
        save_fingerprint(out, Fingerprint.single(pat, path), cfg)
        written.append({"image": path, "fingerprint_file": out})
    report = {"config": cfg.to_dict(), "written": written, "skipped": _skipped(skipped)}
    sys.stdout.write(_dumps(report))
    return 1 if skipped else 0


def cmd_calibrate(args):
    if args.trials < 100:
        raise UsageError("--trials must be >= 100")
    cfg = filter_config(args)
    rows = read_labels(args.labels)
    labels = dict(rows)
    patterns, skipped = extract_patterns([p for p, _ in rows], cfg, args.threads)
    samples = [LabeledPattern(p, labels[p], pat) for p, pat in patterns]
    table = calibrate(samples, args.grid, args.error_margin, args.trials, args.seed,
                      filter_config=cfg, threads=args.threads)
    _emit(args, table.to_json() + "\n")
    if skipped:
        sys.stderr.write(_dumps({"skipped": _skipped(skipped)}))
    return 1 if skipped else 0


def cmd_cluster(args):
    cfg = cluster_config(args)
    table = ThresholdTable.load(args.thresholds)
    result = cluster_database(expand_inputs(args.inputs), cfg, table, args.threads)
    files = {}
    if args.fingerprints_dir:
        os.makedirs(args.fingerprints_dir, exist_ok=True)
        for g in result.groups:
            out = os.path.join(args.fingerprints_dir, f"group{g.id:04d}.prnu")
            save_fingerprint(out, g.fingerprint, cfg.filter_config)
            files[g.id] = out
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "group_id", "rotation"])
        for g in result.groups:
            for m, r in zip(g.members, g.fingerprint.rotations):
                w.writerow([m, g.id, r.name])
        _emit(args, buf.getvalue())
    else:
        _emit(args, result.to_json(files) + "\n")
    return 1 if result.skipped else 0


def cmd_match(args):
    suspects, configs = [], set()
    for path in args.fingerprints:
        f, c = load_fingerprint(path)
        suspects.append(f)
        configs.add(c)
    if len(configs) != 1:
        raise UsageError("suspect fingerprints were made with different filter settings")
    cfg = configs.pop()
    table = ThresholdTable.load(args.thresholds)
    table.check_config(cfg)
    images = expand_inputs(args.inputs)
    rows, skipped = [], []
    for img in images:
        try:
            recs = match_against(suspects, img, cfg, table)
        except (PrnuError, OSError) as e:
            skipped.append((img, f"{type(e).__name__}: {e}"))
            continue
        rows.append((img, recs))
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["image"] + list(args.fingerprints))
        for img, recs in rows:
            w.writerow([img] + [repr(r.correlation) for r in recs])
        _emit(args, buf.getvalue())
    else:
        records = [{"image": img, "fingerprint": args.fingerprints[r.fingerprint],
                    "count": suspects[r.fingerprint].count,
                    "correlation": r.correlation,
                    "threshold": table.lookup(suspects[r.fingerprint].count, 1),
                    "matched": r.matched}
                   for img, recs in rows for r in recs]
        _emit(args, _dumps({"config": cfg.to_dict(), "records": records,
                            "skipped": _skipped(skipped)}))
    return 1 if skipped else 0


def bench_filters(images, sigma0=DEFAULT_SIGMA0):
    """Median wall time per filter over ``images`` (gray arrays), plus ratios."""
    times = {k.value: [] for k in FilterKind}
    for img in images:
        for k in (FilterKind.SECOND_ORDER, FilterKind.FOURTH_ORDER, FilterKind.WAVELET):
            t = time.perf_counter()
            extract_noise(img, k, sigma0)
            times[k.value].append(time.perf_counter() - t)
    med = {k: statistics.median(v) for k, v in times.items()}
    return {
        "images": len(images),
        "median_s": med,
        "ratio_wavelet_to_sod": med["wavelet"] / med["sod"],
        "ratio_wavelet_to_fod": med["wavelet"] / med["fod"],
        "ratio_fod_to_sod": med["fod"] / med["sod"],
        "ordering_ok": med["sod"] < med["fod"] < med["wavelet"],
    }


def cmd_bench(args):
    skipped = []
    if args.synthetic:
        cam = simkit.gen_camera(args.seed, args.size, 0.05)
        images = []
        for i in range(args.synthetic):
            rng = np.random.default_rng([args.seed, i])
            images.append(simkit.gen_image(cam, simkit.gen_scene(args.size, rng),
                                           simkit.DEFAULT_READ_NOISE, rng))
    else:
        paths = expand_inputs(args.inputs)
        if not paths:
            raise UsageError("bench needs input images or --synthetic N")
        images = []
        for p in paths:
            try:
                images.append(center_crop(to_gray_sum(load_image(p)), args.crop))
            except (PrnuError, OSError) as e:
                skipped.append((p, f"{type(e).__name__}: {e}"))
        if not images:
            raise UsageError("no decodable input images")
    report = bench_filters(images, args.sigma0)
    report["skipped"] = _skipped(skipped)
    if args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["filter", "median_s", "ratio_to_wavelet"])
        for k, v in report["median_s"].items():
            w.writerow([k, repr(v), repr(report["median_s"]["wavelet"] / v)])
        _emit(args, buf.getvalue())
    else:
        _emit(args, _dumps(report))
    return 1 if skipped else 0


def cmd_simgen(args):
    if args.output == "-":
        raise UsageError("simgen needs --output DIR")
    db = simkit.gen_database(args.cameras, args.images, args.size, args.strength, args.seed,
                             read_noise_std=args.read_noise,
                             common_strength=args.common_strength)
    paths = simkit.write_corpus(db, args.output)
    sys.stdout.write(_dumps({"images": len(paths), "cameras": args.cameras,
                             "labels": os.path.join(args.output, "labels.csv")}))
    return 0


COMMANDS = {
    "extract": cmd_extract,
    "calibrate": cmd_calibrate,
    "cluster": cmd_cluster,
    "match": cmd_match,
    "bench": cmd_bench,
    "simgen": cmd_simgen,
}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0) if e.code in (0, None) else 2
    try:
        return COMMANDS[args.command](args)
    except (UsageError, PrnuError, OSError, ValueError) as e:
        sys.stderr.write(f"prnugroups {args.command}: error: {e}\n")
        return 2


def main():
    sys.exit(run())
