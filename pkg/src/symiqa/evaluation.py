"""Reference-level splits, multi-run experiments and SROCC reporting."""
from __future__ import annotations

import csv
import json
import logging
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .aggd import FEATURE_INDEX, FEATURE_NAMES
from .data import FeatureCache, PairRecord
from .gp.config import EvolutionConfig, format_config
from .gp.evolve import derived_rng, evolve, select_final
from .gp.modelfile import Model, fit_mos_map, save_model
from .gp.program import Program, eval_program, to_expression_string
from .metrics import SUBSET_FEATURES
from .stats import srocc_flagged

log = logging.getLogger(__name__)

TEST_FRACTION = 0.2
VAL_FRACTION = 0.2  # of the non-test references
MIN_REFERENCES = 5
MIN_GROUP = 3
_PARTITION_STREAM = 101


class PartitionError(ValueError):
    """Too few references to form all three splits."""


@dataclass(frozen=True)
class SplitSpec:
    train_refs: tuple[str, ...]
    val_refs: tuple[str, ...]
    test_refs: tuple[str, ...]
    seed: int

    def select(self, records: Sequence[PairRecord], part: str) -> list[PairRecord]:
        refs = set(getattr(self, f"{part}_refs"))
        return [r for r in records if r.reference_id in refs]


def reference_partition(records: Sequence[PairRecord], seed: int) -> SplitSpec:
    """Shuffle the distinct reference ids and cut them 20 / 64 / 16 into
    test / train / validation."""
    refs = sorted({r.reference_id for r in records})
    if len(refs) < MIN_REFERENCES:
        raise PartitionError(f"need at least {MIN_REFERENCES} references, got {len(refs)}")
    order = derived_rng(seed, _PARTITION_STREAM).permutation(len(refs))
    shuffled = [refs[i] for i in order]
    n_test = max(1, round(TEST_FRACTION * len(refs)))
    n_val = max(1, round(VAL_FRACTION * (len(refs) - n_test)))
    test = shuffled[:n_test]
    val = shuffled[n_test:n_test + n_val]
    train = shuffled[n_test + n_val:]
    return SplitSpec(tuple(sorted(train)), tuple(sorted(val)), tuple(sorted(test)), int(seed))


@dataclass
class DistortionReport:
    scores: dict[int, float]
    too_small: dict[int, int] = field(default_factory=dict)  # id -> sample count


def per_distortion_report(preds, records: Sequence[PairRecord]) -> DistortionReport:
    """SROCC within each distortion type; groups under 3 samples are listed
    in ``too_small`` instead of being scored."""
    preds = np.asarray(preds, dtype=np.float64)
    if preds.shape != (len(records),):
        raise ValueError("one prediction per record is required")
    groups: dict[int, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        groups[r.distortion_id].append(i)
    mos = np.array([r.mos for r in records])
    out = DistortionReport({})
    for dist_id in sorted(groups):
        idx = groups[dist_id]
        if len(idx) < MIN_GROUP:
            out.too_small[dist_id] = len(idx)
        else:
            out.scores[dist_id] = srocc_flagged(preds[idx], mos[idx])[0]
    return out


def _as_model(model: Model | Program) -> Model:
    return model if isinstance(model, Model) else Model(model)


def cross_dataset_eval(model: Model | Program, records: Sequence[PairRecord],
                       cache: FeatureCache) -> tuple[float, bool]:
    """``|SROCC|`` of raw model outputs against MOS over a whole dataset,
    plus the degenerate-correlation flag."""
    model = _as_model(model)
    bad = sorted(i for i in model.program.terminals() if i >= len(FEATURE_NAMES))
    if bad:
        raise KeyError(f"model uses terminals outside the feature schema: {bad}")
    X = cache.matrix(records)
    rho, undefined = srocc_flagged(model.raw(X), [r.mos for r in records])
    return abs(rho), undefined


@dataclass
class RunResult:
    seed: int
    split: SplitSpec
    model: Model
    train_error: float
    val_srocc: float
    test_srocc: float
    per_distortion: DistortionReport


@dataclass
class EvalReport:
    runs: list[RunResult]

    @property
    def per_run(self) -> list[float]:
        return [r.test_srocc for r in self.runs]

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_run))

    @property
    def std(self) -> float:
        """Sample standard deviation (0 for a single run)."""
        v = self.per_run
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    @property
    def max(self) -> float:
        return float(np.max(self.per_run))

    @property
    def overall_srocc(self) -> float:
        return self.mean

    @property
    def per_distortion(self) -> dict[int, float]:
        """Mean per-distortion SROCC across runs that scored the group."""
        acc: dict[int, list[float]] = defaultdict(list)
        for r in self.runs:
            for k, v in r.per_distortion.scores.items():
                acc[k].append(v)
        return {k: float(np.mean(acc[k])) for k in sorted(acc)}


def run_once(cfg: EvolutionConfig, records: Sequence[PairRecord], X: np.ndarray,
             terminals: Sequence[int] | None = None) -> RunResult:
    """Partition, evolve, pick the validation-best front member, fit the MOS
    map on training data and score the held-out test references."""
    if terminals is None and cfg.terminal_set == "subset":
        terminals = [FEATURE_INDEX[name] for name in SUBSET_FEATURES]
    split = reference_partition(records, cfg.seed)
    index = {r.key: i for i, r in enumerate(records)}
    parts = {}
    for name in ("train", "val", "test"):
        sel = split.select(records, name)
        parts[name] = (sel, X[[index[r.key] for r in sel]], np.array([r.mos for r in sel]))

    (_, X_tr, y_tr), (_, X_va, y_va), (test_recs, X_te, y_te) = parts["train"], parts["val"], parts["test"]
    result = evolve(cfg, X_tr, y_tr, X_va, y_va, terminals=terminals)
    program = select_final(result.front, X_va, y_va)
    slope, intercept = fit_mos_map(eval_program(program, X_tr), y_tr)
    model = Model(program, slope, intercept, cfg.config_hash(), cfg.seed)

    error = result.front_records[result.front.index(program)].error
    val_rho = abs(srocc_flagged(eval_program(program, X_va), y_va)[0])
    test_pred = model.mos(X_te)
    # the same prediction pass feeds the overall and per-distortion numbers
    test_rho = srocc_flagged(test_pred, y_te)[0]
    return RunResult(cfg.seed, split, model, error, val_rho, test_rho,
                     per_distortion_report(test_pred, test_recs))


def _run_star(args):
    return run_once(*args)


def run_seeds(base_seed: int, n_runs: int) -> list[int]:
    return [int(base_seed) + i for i in range(n_runs)]


def run_experiment(cfg: EvolutionConfig, records: Sequence[PairRecord], cache: FeatureCache,
                   n_runs: int = 30, workers: int = 1,
                   terminals: Sequence[int] | None = None) -> EvalReport:
    """``n_runs`` independent runs with seeds ``cfg.seed, cfg.seed + 1, ...``."""
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    X = cache.matrix(records)
    jobs = [(cfg.with_seed(s), list(records), X, terminals) for s in run_seeds(cfg.seed, n_runs)]
    if workers > 1 and n_runs > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_star, jobs))
    else:
        runs = [run_once(*job) for job in jobs]
    return EvalReport(runs)


# --- serialisation -------------------------------------------------------------

RUN_COLUMNS = ("seed", "test_srocc", "val_srocc", "train_error", "complexity", "expression")
DISTORTION_COLUMNS = ("distortion_id", "srocc", "n")


def _fmt(x: float) -> str:
    return repr(float(x))


def write_per_distortion(path, report: DistortionReport, records: Sequence[PairRecord] | None = None) -> None:
    counts: dict[int, int] = defaultdict(int)
    for r in records or ():
        counts[r.distortion_id] += 1
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DISTORTION_COLUMNS)
        for k in sorted(set(report.scores) | set(report.too_small)):
            if k in report.scores:
                w.writerow([k, _fmt(report.scores[k]), counts.get(k, "")])
            else:
                w.writerow([k, "", report.too_small[k]])


def write_report(report: EvalReport, out_dir, dataset_id: str, cfg: EvolutionConfig,
                 records: Sequence[PairRecord]) -> Path:
    """Write models, per-run CSVs and a JSON summary into a fresh directory
    ``<out_dir>/<dataset_id>-seed<base>``; an existing one is an error."""
    base_seed = report.runs[0].seed
    run_dir = Path(out_dir) / f"{dataset_id}-seed{base_seed}"
    run_dir.mkdir(parents=True, exist_ok=False)
    (run_dir / "config.txt").write_text(format_config(cfg))

    by_key = {r.key: r for r in records}
    with open(run_dir / f"runs_{dataset_id}_seed{base_seed}.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_COLUMNS)
        for run in report.runs:
            expr = to_expression_string(run.model.program, FEATURE_NAMES)
            w.writerow([run.seed, _fmt(run.test_srocc), _fmt(run.val_srocc),
                        _fmt(run.train_error), run.model.program.complexity, expr])
            save_model(run_dir / f"model_{dataset_id}_seed{run.seed}.txt", run.model, FEATURE_NAMES)
            test = [by_key[k] for k in sorted(by_key) if by_key[k].reference_id in set(run.split.test_refs)]
            write_per_distortion(run_dir / f"per_distortion_{dataset_id}_seed{run.seed}.csv",
                                 run.per_distortion, test)

    summary = {
        "dataset": dataset_id,
        "config_hash": cfg.config_hash(),
        "seeds": [r.seed for r in report.runs],
        "n_runs": len(report.runs),
        "mean": report.mean,
        "std": report.std,
        "max": report.max,
        "per_distortion_mean": {str(k): v for k, v in report.per_distortion.items()},
    }
    (run_dir / f"summary_{dataset_id}_seed{base_seed}.json").write_text(json.dumps(summary, indent=2) + "\n")
    return run_dir


def _read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def aggregate_runs(runs_dir) -> tuple[list[dict], dict[int, list[float]]]:
    """Collect per-run rows and per-distortion values from every run CSV
    found below ``runs_dir``."""
    runs_dir = Path(runs_dir)
    rows = []
    for path in sorted(runs_dir.rglob("runs_*.csv")):
        for row in _read_csv(path):
            row["source"] = str(path.relative_to(runs_dir))
            rows.append(row)
    dist: dict[int, list[float]] = defaultdict(list)
    for path in sorted(runs_dir.rglob("per_distortion_*.csv")):
        for row in _read_csv(path):
            if row["srocc"]:
                dist[int(row["distortion_id"])].append(float(row["srocc"]))
    return rows, dict(sorted(dist.items()))


def format_summary(rows: list[dict], dist: dict[int, list[float]]) -> str:
    """Overall mean / std / max and a per-distortion table as plain text."""
    lines = []
    if rows:
        vals = np.array([float(r["test_srocc"]) for r in rows])
        std = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        lines.append(f"runs {len(vals)}  mean {vals.mean():.4f}  std {std:.4f}  max {vals.max():.4f}")
    else:
        lines.append("no run CSVs found")
    if dist:
        lines.append("distortion  mean_srocc  runs")
        for k, v in dist.items():
            lines.append(f"{k:>10}  {np.mean(v):>10.4f}  {len(v):>4}")
    return "\n".join(lines)
