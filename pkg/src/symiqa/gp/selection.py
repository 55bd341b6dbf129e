"""Correlation fitness and Pareto tournament selection over (error, complexity)."""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from ..stats import pearson, srocc_flagged
from .program import Program, eval_program


class FitnessRecord(NamedTuple):
    error: float
    complexity: int


def correlation(pred, y, kind: str = "spearman") -> float:
    """Signed correlation; 0 for constant or non-finite predictions."""
    if kind == "spearman":
        return srocc_flagged(pred, y)[0]
    if kind == "pearson":
        return pearson(pred, y)[0]
    raise ValueError(f"unknown fitness kind {kind!r}")


def fitness(p: Program, X, y, kind: str = "spearman") -> FitnessRecord:
    """``1 - |rho|`` of the program's predictions against ``y``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError(f"X {X.shape} and y {y.shape} disagree")
    if y.shape[0] < 3:
        raise ValueError("fitness needs at least 3 samples")
    pred = eval_program(p, X)
    return FitnessRecord(1.0 - abs(correlation(pred, y, kind)), p.complexity)


def dominates(a: FitnessRecord, b: FitnessRecord) -> bool:
    return (a.error <= b.error and a.complexity <= b.complexity
            and (a.error < b.error or a.complexity < b.complexity))


def non_dominated(records: Sequence[FitnessRecord]) -> list[int]:
    """Indices of records not dominated by any other record in the group."""
    return [i for i, r in enumerate(records)
            if not any(dominates(other, r) for j, other in enumerate(records) if j != i)]


def pareto_tournament(records: Sequence[FitnessRecord]) -> list[int]:
    """Winners of one Pareto tournament: the non-dominated members of the sample."""
    return non_dominated(records)


def select_parent(records: Sequence[FitnessRecord], rng: np.random.Generator,
                  tournament_size: int, pareto_sample: int) -> int:
    """Sample ``tournament_size`` candidates, keep the ``pareto_sample`` most
    accurate, and pick uniformly among their non-dominated members."""
    n = len(records)
    picks = rng.choice(n, size=min(tournament_size, n), replace=False)
    picks = sorted(picks, key=lambda i: (records[i].error, i))[:pareto_sample]
    winners = pareto_tournament([records[i] for i in picks])
    return int(picks[winners[rng.integers(len(winners))]])
