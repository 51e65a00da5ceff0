"""Command-line entry point: retrieve, segment, annotate, eval, synth, sweep.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .dataset import DatasetError, load_dataset, load_ground_truth, read_rgb, write_dataset, write_overlay
from .evaluation import pooled_accuracy
from .pipeline import PreparedDatabase, RunConfig, annotate, infer_labels, retrieve
from .sparse_coder import NumericalError, RetrievalError
from .synth import split, synth_dataset

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("artifact")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# flag -> RunConfig field
_CONFIG_FLAGS = {
    "beta": "beta", "gamma": "gamma", "lam": "lam", "p": "p", "q": "q", "sigma": "sigma",
    "superpixels": "superpixels", "compactness": "compactness", "unary_mode": "unary_mode",
    "max_em_iters": "max_em_iters",
}


def _add_config_flags(parser):
    g = parser.add_argument_group("run configuration (defaults from RunConfig)")
    g.add_argument("--config", type=Path, help="JSON file with RunConfig fields")
    g.add_argument("--beta", type=float)
    g.add_argument("--gamma", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("-p", type=int, help="references kept per retrieval")
    g.add_argument("-q", type=int, help="outer edges per target superpixel and reference")
    g.add_argument("--sigma", type=float, help="sparse-coding stopping threshold")
    g.add_argument("--superpixels", type=int)
    g.add_argument("--compactness", type=float)
    g.add_argument("--unary-mode", dest="unary_mode", choices=("affinity", "literal"))
    g.add_argument("--max-em-iters", dest="max_em_iters", type=int)


def _config(args):
    try:
        cfg = RunConfig.from_file(args.config) if getattr(args, "config", None) else RunConfig()
        overrides = {field: getattr(args, flag) for flag, field in _CONFIG_FLAGS.items()
                     if getattr(args, flag, None) is not None}
        return replace(cfg, **overrides)
    except FileNotFoundError as exc:
        raise DatasetError(f"config file not found: {exc.filename}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DatasetError):
            raise
        raise UsageError(f"invalid configuration: {exc}") from exc


def _load_target(path):
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"target image not found: {path}")
    return read_rgb(path)


def _names(db, ids):
    return sorted(db.label_table[i].name for i in ids)


def _refs_json(db, refs):
    return [{"index": int(k), "identifier": db.images[k].identifier, "weight": float(w),
             "tags": _names(db, db.images[k].tags)} for k, w in zip(refs.indices, refs.weights)]


# ----------------------------------------------------------------- commands

def cmd_retrieve(args):
    cfg = _config(args)
    db = load_dataset(args.dataset)
    code, refs = retrieve(_load_target(args.target), db, cfg, identifier=Path(args.target).name)
    out = {"iterations": code.iterations, "converged": code.converged,
           "energy": code.energy_trace[-1], "references": _refs_json(db, refs)}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def segment_report(db, result, target_name):
    return {
        "target": target_name,
        "em_iterations": result.em_iterations,
        "converged": result.converged,
        "label_set_history": [_names(db, s) for s in result.label_set_history],
        "final_labels": _names(db, result.assignment.label_set),
        "references": [_refs_json(db, r) for r in result.references_per_iter],
        "energies": [float(e) for e in result.energies],
        "n_superpixels": int(result.decomposition.n_segments),
    }


def _write_energy_csv(path, result):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["em_iteration", "stage", "step", "energy"])
        for n, (code, swaps) in enumerate(zip(result.codes, result.swap_traces), start=1):
            for k, e in enumerate(code.energy_trace):
                w.writerow([n, "sparse_code", k, repr(float(e))])
            for k, e in enumerate(swaps):
                w.writerow([n, "swap", k, repr(float(e))])


def cmd_segment(args):
    cfg = _config(args)
    db = load_dataset(args.dataset)
    pixels = _load_target(args.target)
    name = Path(args.target).name
    result = infer_labels(pixels, db, cfg, identifier=name)
    out = Path(args.out)
    stem = out / Path(name).stem
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create {out}: {exc}") from exc
    labels_path, overlay_path = write_overlay(pixels, result.decomposition.segment_map,
                                              result.assignment.y, stem, db.palette)
    report = segment_report(db, result, name)
    report["files"] = {"labels": labels_path.name, "overlay": overlay_path.name,
                       "energy_trace": f"{stem.name}.energy.csv"}
    Path(f"{stem}.report.json").write_text(json.dumps(report, indent=2))
    _write_energy_csv(f"{stem}.energy.csv", result)
    print(json.dumps({k: report[k] for k in ("target", "em_iterations", "converged", "final_labels")}))
    return EXIT_OK


def cmd_annotate(args):
    cfg = _config(args)
    db = load_dataset(args.dataset)
    K = min(cfg.annotate_k, len(db)) if args.K is None else args.K
    if not 1 <= K <= len(db):
        raise UsageError(f"K must lie in 1..{len(db)}")
    res = annotate(_load_target(args.target), db, K=K, n=args.n, weighted=not args.unweighted,
                   config=cfg, identifier=Path(args.target).name)
    names = [lab.name for lab in db.label_table]
    out = {"top": [names[i] for i in res.top_n],
           "scores": {names[i]: float(res.z[i]) for i in res.ranked_labels},
           "references": [db.images[k].identifier for k in res.references],
           "short": res.short}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def _segment_one(job):
    """Worker: (cfg, database, pixels, identifier) -> predicted id raster."""
    cfg, db, pixels, identifier = job
    return infer_labels(pixels, db, cfg, identifier=identifier).pixel_labels()


def _run_suite(db, targets, cfg, jobs):
    """Predicted rasters for every target; order follows ``targets``."""
    work = [(cfg, db, im.pixels, im.identifier) for im in targets.images]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_segment_one, work))
    prepared = PreparedDatabase(db, cfg)
    return [infer_labels(px, prepared, c, identifier=i).pixel_labels() for c, _, px, i in work]


def _load_truths(targets_root, targets, db):
    gt_dir = Path(targets_root) / "gt"
    truths = []
    for im in targets.images:
        path = gt_dir / (Path(im.identifier).stem + ".png")
        if not path.is_file():
            raise DatasetError(f"ground truth missing for {im.identifier}")
        truths.append(load_ground_truth(path, db.label_table, im.shape))
    return truths


def _check_tables(db, targets):
    if [lab.name for lab in targets.label_table] != [lab.name for lab in db.label_table]:
        raise DatasetError("target label table differs from the database label table")


def cmd_eval(args):
    cfg = _config(args)
    db = load_dataset(args.dataset)
    targets = load_dataset(args.targets)
    _check_tables(db, targets)
    truths = _load_truths(args.targets, targets, db)
    preds = _run_suite(db, targets, cfg, args.jobs)
    report = pooled_accuracy(zip(preds, truths))
    names = [lab.name for lab in db.label_table]
    width = max(len(n) for n in names + ["average"])
    for c, acc in sorted(report.per_class.items()):
        print(f"{names[c]:<{width}}  {acc:6.3f}")
    print(f"{'average':<{width}}  {report.average:6.3f}")
    doc = report.to_dict(names)
    print(json.dumps(doc))
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2))
    return EXIT_OK


def cmd_synth(args):
    if args.images < 1 or args.targets < 0:
        raise UsageError("--images must be positive and --targets nonnegative")
    try:
        db, truths = synth_dataset(args.seed, args.images + args.targets, args.classes)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    (head, head_gt), (tail, tail_gt) = split(db, truths, args.images)
    out = Path(args.out)
    write_dataset(out / "db", head, head_gt)
    if args.targets:
        write_dataset(out / "targets", tail, tail_gt)
    print(json.dumps({"db": str(out / "db"), "targets": str(out / "targets") if args.targets else None,
                      "labels": [lab.name for lab in db.label_table]}))
    return EXIT_OK


def _float_list(text):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("grid values must be nonnegative")
    return vals


def sweep_table(db, targets, truths, cfg, betas, gammas, jobs=1):
    """{(beta, gamma): average per-class accuracy} over the target suite."""
    table = {}
    for b in betas:
        for g in gammas:
            preds = _run_suite(db, targets, replace(cfg, beta=b, gamma=g), jobs)
            table[(b, g)] = pooled_accuracy(zip(preds, truths)).average
    return table


def cmd_sweep(args):
    cfg = _config(args)
    db = load_dataset(args.dataset)
    targets = load_dataset(args.targets)
    _check_tables(db, targets)
    truths = _load_truths(args.targets, targets, db)
    table = sweep_table(db, targets, truths, cfg, args.betas, args.gammas, args.jobs)
    rows = [["beta\\gamma"] + [repr(g) for g in args.gammas]]
    for b in args.betas:
        rows.append([repr(b)] + [f"{table[(b, g)]:.6f}" for g in args.gammas])
    if args.out:
        with open(args.out, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    csv.writer(sys.stdout).writerows(rows)
    return EXIT_OK


# ----------------------------------------------------------------- parser

def build_parser():
    parser = _Parser(prog="artifact", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("retrieve", help="sparse-code a target against the database")
    p.add_argument("dataset", type=Path)
    p.add_argument("target", type=Path)
    _add_config_flags(p)
    p.set_defaults(func=cmd_retrieve)

    p = sub.add_parser("segment", help="label a target image end to end")
    p.add_argument("dataset", type=Path)
    p.add_argument("target", type=Path)
    p.add_argument("out", type=Path, help="output directory")
    _add_config_flags(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("annotate", help="rank image-level labels for a target")
    p.add_argument("dataset", type=Path)
    p.add_argument("target", type=Path)
    p.add_argument("-K", type=int, help="number of neighbours")
    p.add_argument("-n", type=int, help="number of labels to report")
    p.add_argument("--unweighted", action="store_true", help="count neighbour labels without weights")
    _add_config_flags(p)
    p.set_defaults(func=cmd_annotate)

    p = sub.add_parser("eval", help="average per-class accuracy over a labelled target set")
    p.add_argument("dataset", type=Path)
    p.add_argument("targets", type=Path, help="dataset directory with gt/ rasters")
    p.add_argument("--out", type=Path, help="also write the JSON report here")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="write a synthetic database and target set")
    p.add_argument("out", type=Path)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--images", type=int, default=40)
    p.add_argument("--targets", type=int, default=10)
    p.add_argument("--classes", type=int, default=4)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("sweep", help="accuracy over a beta x gamma grid")
    p.add_argument("dataset", type=Path)
    p.add_argument("targets", type=Path)
    p.add_argument("--betas", type=_float_list, default=[0.0, 0.1])
    p.add_argument("--gammas", type=_float_list, default=[0.0, 0.2])
    p.add_argument("--out", type=Path, help="CSV output path")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("artifact: error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"artifact: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, RetrievalError) as exc:
        print(f"artifact: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"artifact: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"artifact: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
