"""Evolution configuration and its plain-text ``key = value`` file format."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .program import OPERATOR_SETS


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvolutionConfig:
    warm_pop: int = 500
    warm_gens: int = 10
    main_pop: int = 600
    main_gens: int = 400
    crossover_rate: float = 0.80
    mutation_rate: float = 0.20
    tournament_size: int = 10
    pareto_sample: int = 5
    elitism: int = 15
    max_len: int = 64
    operator_set: str = "extended"
    fitness_kind: str = "spearman"
    seed: int = 0
    warm_start: bool = True
    terminal_set: str = "full"
    constant_prob: float = 0.2
    constant_range: float = 2.0
    constant_jitter: float = 0.1

    def __post_init__(self):
        for name in ("warm_pop", "warm_gens", "main_pop", "main_gens", "tournament_size",
                     "pareto_sample", "max_len"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.elitism < 0 or self.elitism >= self.main_pop:
            raise ConfigError("elitism must be in [0, main_pop)")
        if self.pareto_sample > self.tournament_size:
            raise ConfigError("pareto_sample cannot exceed tournament_size")
        if abs(self.crossover_rate + self.mutation_rate - 1.0) > 1e-9:
            raise ConfigError("crossover_rate + mutation_rate must equal 1")
        if not 0.0 <= self.crossover_rate <= 1.0:
            raise ConfigError("rates must lie in [0, 1]")
        if self.operator_set not in OPERATOR_SETS:
            raise ConfigError(f"operator_set must be one of {sorted(OPERATOR_SETS)}")
        if self.fitness_kind not in ("spearman", "pearson"):
            raise ConfigError("fitness_kind must be 'spearman' or 'pearson'")
        if self.terminal_set not in ("full", "subset"):
            raise ConfigError("terminal_set must be 'full' or 'subset'")
        if not 0.0 <= self.constant_prob <= 1.0:
            raise ConfigError("constant_prob must lie in [0, 1]")

    @property
    def operators(self) -> tuple[str, ...]:
        return OPERATOR_SETS[self.operator_set]

    def with_seed(self, seed: int) -> "EvolutionConfig":
        return replace(self, seed=int(seed))

    def config_hash(self) -> str:
        """Hash of every field except the seed."""
        payload = {k: v for k, v in asdict(self).items() if k != "seed"}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


# Parameters the published protocol fixes; everything else is a local default.
_PROTOCOL_FIELDS = {
    "warm_pop", "warm_gens", "main_pop", "main_gens", "crossover_rate",
    "mutation_rate", "tournament_size", "pareto_sample", "elitism", "fitness_kind",
}


def _coerce(name: str, raw: str, kind):
    raw = raw.strip()
    try:
        if kind is bool:
            lowered = raw.lower()
            if lowered in ("true", "yes", "1"):
                return True
            if lowered in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config(text: str) -> EvolutionConfig:
    types = {f.name: type(f.default) for f in fields(EvolutionConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, raw, types[key])
    return EvolutionConfig(**values)


def load_config(path) -> EvolutionConfig:
    return parse_config(Path(path).read_text())


def format_config(cfg: EvolutionConfig) -> str:
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if isinstance(value, bool):
            value = "true" if value else "false"
        note = "" if f.name in _PROTOCOL_FIELDS else "  # local default"
        lines.append(f"{f.name} = {value}{note}")
    return "\n".join(lines) + "\n"
