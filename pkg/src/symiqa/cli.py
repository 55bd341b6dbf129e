"""Command-line interface: ``symiqa {extract,export,train,score,eval,report}``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .aggd import FEATURE_NAMES, featurize
from .data import (
    CacheError,
    IngestionError,
    extract_and_cache,
    load_manifest,
    load_records,
    load_tid2013,
    read_cache,
    write_manifest,
)
from .evaluation import (
    aggregate_runs,
    cross_dataset_eval,
    format_summary,
    per_distortion_report,
    run_experiment,
    write_per_distortion,
    write_report,
)
from .gp.config import ConfigError, EvolutionConfig, format_config, load_config
from .gp.modelfile import Model, ModelFormatError, load_model
from .gp.program import to_expression_string
from .features import extract_all
from .imaging import load_image
from .metrics import BUILTIN_PROGRAMS, haarpsi_score
from .stats import srocc_flagged

log = logging.getLogger("symiqa")

HAARPSI = "builtin:haarpsi"


def _dataset(kind: str, root: str):
    return load_tid2013(root) if kind == "tid2013" else load_manifest(root)


def _resolve_model(spec: str) -> Model | None:
    """``None`` means the HaarPSI baseline, which works on images directly."""
    if spec == HAARPSI:
        return None
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTIN_PROGRAMS:
            raise ModelFormatError(f"unknown built-in model {spec!r}")
        return Model(BUILTIN_PROGRAMS[name])
    return load_model(spec, FEATURE_NAMES)


def _expression(model: Model | None) -> str:
    if model is None:
        return "haarpsi(ref, dist)"
    return to_expression_string(model.program, FEATURE_NAMES)


def cmd_extract(args) -> int:
    records = _dataset(args.dataset, args.root)
    res = extract_and_cache(records, args.cache, workers=args.workers)
    print(f"# cache {args.cache} config_hash {res.cache.config_hash}")
    print(f"pairs {len(records)} extracted {res.extracted} failed {len(res.failures)}")
    for key, err in sorted(res.failures.items()):
        print(f"failed {key}: {err}", file=sys.stderr)
    return 1 if res.failures else 0


def cmd_export(args) -> int:
    records = _dataset(args.dataset, args.root)
    write_manifest(args.out, records)
    print(f"wrote {len(records)} records to {args.out}")
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config) if args.config else EvolutionConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    records = load_records(args.records)
    cache = read_cache(args.cache)
    print("# config")
    print("".join(f"#   {line}\n" for line in format_config(cfg).splitlines()), end="")
    report = run_experiment(cfg, records, cache, n_runs=args.runs, workers=args.workers)
    run_dir = write_report(report, args.out, args.dataset_id, cfg, records)
    for run in report.runs:
        print(f"seed {run.seed} test_srocc {run.test_srocc:.6f} val_srocc {run.val_srocc:.6f} "
              f"expr {to_expression_string(run.model.program, FEATURE_NAMES)}")
    print(f"mean {report.mean:.6f} std {report.std:.6f} max {report.max:.6f}")
    print(f"wrote {run_dir}")
    return 0


def cmd_score(args) -> int:
    model = _resolve_model(args.model)
    ref, dist = load_image(args.ref), load_image(args.dist)
    if model is None:
        raw = mos = haarpsi_score(ref, dist)
    else:
        fv = featurize(extract_all(ref, dist))
        raw = float(model.raw(fv.values[None, :])[0])
        mos = model.slope * raw + model.intercept
    print(f"model {args.model}")
    print(f"raw {raw:.6f}")
    print(f"mos {mos:.6f}")
    print(f"expression {_expression(model)}")
    return 0


def cmd_eval(args) -> int:
    model = _resolve_model(args.model)
    records = load_records(args.records)
    if model is None:
        preds = np.array([haarpsi_score(load_image(r.ref_path), load_image(r.dist_path)) for r in records])
        rho, undefined = srocc_flagged(preds, [r.mos for r in records])
        rho = abs(rho)
    else:
        cache = read_cache(args.cache)
        rho, undefined = cross_dataset_eval(model, records, cache)
        preds = model.raw(cache.matrix(records))
    print(f"model {args.model}")
    print(f"expression {_expression(model)}")
    print(f"pairs {len(records)} srocc {rho:.6f}" + (" (undefined: constant predictions)" if undefined else ""))
    if args.per_distortion:
        rep = per_distortion_report(preds, records)
        for k, v in rep.scores.items():
            print(f"distortion {k} srocc {abs(v):.6f}")
        for k, n in rep.too_small.items():
            print(f"distortion {k} skipped ({n} samples)")
        if args.out:
            write_per_distortion(args.out, rep, records)
    return 0


def cmd_report(args) -> int:
    rows, dist = aggregate_runs(args.runs_dir)
    print(format_summary(rows, dist))
    return 0 if rows else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symiqa", description="Symbolic full-reference image quality models.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("extract", help="extract and cache feature vectors")
    e.add_argument("--dataset", choices=("tid2013", "manifest"), required=True)
    e.add_argument("--root", required=True, help="TID2013 directory or manifest CSV")
    e.add_argument("--cache", required=True)
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_extract)

    x = sub.add_parser("export", help="write a dataset's records as a manifest CSV")
    x.add_argument("--dataset", choices=("tid2013", "manifest"), required=True)
    x.add_argument("--root", required=True)
    x.add_argument("--out", required=True)
    x.set_defaults(func=cmd_export)

    t = sub.add_parser("train", help="run the multi-seed training protocol")
    t.add_argument("--cache", required=True)
    t.add_argument("--records", required=True, help="TID2013 directory or manifest CSV")
    t.add_argument("--config", help="key = value config file (defaults if omitted)")
    t.add_argument("--runs", type=int, default=30)
    t.add_argument("--seed", type=int, help="base seed (overrides the config)")
    t.add_argument("--out", required=True)
    t.add_argument("--dataset-id", default="dataset")
    t.add_argument("--workers", type=int, default=1)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("score", help="score one reference/distorted pair")
    s.add_argument("--model", required=True, help="model file or builtin:evoiqa-full|evoiqa-subset|haarpsi")
    s.add_argument("--ref", required=True)
    s.add_argument("--dist", required=True)
    s.set_defaults(func=cmd_score)

    v = sub.add_parser("eval", help="evaluate a model over a whole dataset")
    v.add_argument("--model", required=True)
    v.add_argument("--cache", help="feature cache (not needed for builtin:haarpsi)")
    v.add_argument("--records", required=True)
    v.add_argument("--per-distortion", action="store_true")
    v.add_argument("--out", help="per-distortion CSV path")
    v.set_defaults(func=cmd_eval)

    r = sub.add_parser("report", help="summarise run CSVs")
    r.add_argument("--runs-dir", required=True)
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "eval" and args.model != HAARPSI and not args.cache:
        parser.error("eval needs --cache for feature-based models")
    try:
        return args.func(args)
    except (IngestionError, CacheError, ConfigError, ModelFormatError, FileExistsError,
            FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
