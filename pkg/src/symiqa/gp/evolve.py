"""Two-phase evolution: a mutation-only warm-start sprint followed by the
main crossover/mutation search with elitism and Pareto tournaments.

Random streams are derived from ``(seed, phase, generation, slot)`` so every
offspring is reproducible on its own, independent of evaluation order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .config import EvolutionConfig
from .program import Program, eval_program
from .selection import FitnessRecord, correlation, fitness, non_dominated, select_parent
from .variation import TokenSampler, mutate, random_program, two_point_crossover

log = logging.getLogger(__name__)

_WARM_INIT, _WARM_GEN, _MAIN_INIT, _MAIN_GEN = range(4)

# Offspring already present in the next generation are mutated again.
DUPLICATE_RETRIES = 3


def derived_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, *keys])


class _Scorer:
    """Memoised fitness over one training set."""

    def __init__(self, X, y, kind: str):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.kind = kind
        self._cache: dict[tuple, FitnessRecord] = {}

    def __call__(self, p: Program) -> FitnessRecord:
        rec = self._cache.get(p.tokens)
        if rec is None:
            rec = fitness(p, self.X, self.y, self.kind)
            self._cache[p.tokens] = rec
        return rec


@dataclass
class EvolutionResult:
    front: list[Program]
    front_records: list[FitnessRecord]
    history: list[float]
    val_history: list[float] = field(default_factory=list)
    population: list[Program] = field(default_factory=list)


def _ranked(records: Sequence[FitnessRecord]) -> list[int]:
    return sorted(range(len(records)), key=lambda i: (records[i].error, records[i].complexity, i))


def _elites(pop: Sequence[Program], records: Sequence[FitnessRecord], count: int) -> list[Program]:
    out, seen = [], set()
    for i in _ranked(records):
        if len(out) == count:
            break
        if pop[i].tokens not in seen:
            seen.add(pop[i].tokens)
            out.append(pop[i])
    return out


def _make_sampler(cfg: EvolutionConfig, X, terminals) -> TokenSampler:
    if terminals is None:
        terminals = range(np.asarray(X).shape[1])
    return TokenSampler(cfg, list(terminals))


def warm_start(cfg: EvolutionConfig, X, y, terminals: Sequence[int] | None = None,
               scorer: _Scorer | None = None) -> list[Program]:
    """Mutation-only sprint; returns the surviving ``warm_pop`` programs."""
    sampler = _make_sampler(cfg, X, terminals)
    scorer = scorer or _Scorer(X, y, cfg.fitness_kind)
    pop = [random_program(cfg, sampler, derived_rng(cfg.seed, _WARM_INIT, i))
           for i in range(cfg.warm_pop)]
    n_elite = min(cfg.elitism, cfg.warm_pop - 1)
    for gen in range(cfg.warm_gens):
        records = [scorer(p) for p in pop]
        nxt = _elites(pop, records, n_elite)
        seen = {p.tokens for p in nxt}
        for slot in range(len(nxt), cfg.warm_pop):
            rng = derived_rng(cfg.seed, _WARM_GEN, gen, slot)
            parent = pop[select_parent(records, rng, cfg.tournament_size, cfg.pareto_sample)]
            child = mutate(parent, sampler, rng)
            for _ in range(DUPLICATE_RETRIES):
                if child.tokens not in seen:
                    break
                child = mutate(child, sampler, rng)
            seen.add(child.tokens)
            nxt.append(child)
        pop = nxt
    return pop


def evolve(cfg: EvolutionConfig, X_train, y_train, X_val=None, y_val=None,
           terminals: Sequence[int] | None = None,
           initial: Sequence[Program] | None = None) -> EvolutionResult:
    """Run the full search and return the final Pareto front.

    ``history`` holds the best training error before each generation and
    after the last one; ``val_history`` the validation ``|rho|`` of that
    same best program when validation data is given.
    """
    sampler = _make_sampler(cfg, X_train, terminals)
    scorer = _Scorer(X_train, y_train, cfg.fitness_kind)

    if initial is None:
        initial = warm_start(cfg, X_train, y_train, terminals, scorer) if cfg.warm_start else []
    seeded = list(initial)
    if len(seeded) > cfg.main_pop:
        recs = [scorer(p) for p in seeded]
        seeded = [seeded[i] for i in _ranked(recs)[: cfg.main_pop]]
    pop = seeded + [random_program(cfg, sampler, derived_rng(cfg.seed, _MAIN_INIT, i))
                    for i in range(len(seeded), cfg.main_pop)]

    history: list[float] = []
    val_history: list[float] = []

    def record(records):
        best = _ranked(records)[0]
        history.append(records[best].error)
        if X_val is not None:
            pred = np.asarray(_eval_rows(pop[best], X_val))
            val_history.append(abs(correlation(pred, y_val, "spearman")))

    for gen in range(cfg.main_gens):
        records = [scorer(p) for p in pop]
        record(records)
        nxt = _elites(pop, records, cfg.elitism)
        seen = {p.tokens for p in nxt}
        for slot in range(len(nxt), cfg.main_pop):
            rng = derived_rng(cfg.seed, _MAIN_GEN, gen, slot)
            if rng.random() < cfg.crossover_rate:
                a = pop[select_parent(records, rng, cfg.tournament_size, cfg.pareto_sample)]
                b = pop[select_parent(records, rng, cfg.tournament_size, cfg.pareto_sample)]
                child = two_point_crossover(a, b, rng, cfg.max_len)
            else:
                parent = pop[select_parent(records, rng, cfg.tournament_size, cfg.pareto_sample)]
                child = mutate(parent, sampler, rng)
            for _ in range(DUPLICATE_RETRIES):
                if child.tokens not in seen:
                    break
                child = mutate(child, sampler, rng)
            seen.add(child.tokens)
            nxt.append(child)
        pop = nxt
        if gen % 50 == 0:
            log.debug("gen %d best error %.5f", gen, history[-1])

    records = [scorer(p) for p in pop]
    record(records)

    unique: dict[tuple, int] = {}
    for i, p in enumerate(pop):
        unique.setdefault(p.tokens, i)
    idx = list(unique.values())
    front_idx = [idx[k] for k in non_dominated([records[i] for i in idx])]
    front_idx.sort(key=lambda i: (records[i].complexity, records[i].error, i))
    return EvolutionResult(
        front=[pop[i] for i in front_idx],
        front_records=[records[i] for i in front_idx],
        history=history,
        val_history=val_history,
        population=pop,
    )


def _eval_rows(p: Program, X) -> np.ndarray:
    return eval_program(p, np.asarray(X, dtype=np.float64))


def select_final(front: Sequence[Program], X_val, y_val) -> Program:
    """Front member with the highest validation ``|rho|``; ties go to the
    simpler program, then to the earlier one."""
    if not front:
        raise ValueError("cannot select from an empty front")
    best, best_key = None, None
    for i, p in enumerate(front):
        rho = abs(correlation(_eval_rows(p, X_val), y_val, "spearman"))
        key = (-rho, p.complexity, i)
        if best_key is None or key < best_key:
            best, best_key = p, key
    return best
