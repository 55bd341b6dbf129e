"""Text serialisation of evolved models.

Layout::

    # symiqa-model 1
    # config_hash 3f2a...
    # seed 7
    # mos_map <slope> <intercept>
    # terminal 12 vsi.sgm.sigma
    # expression (vsi.sgm.sigma * 0.5)
    T 12
    C 0.5
    O mul

Header lines start with ``#``; every other non-blank line is one token.
Constants are written with ``repr`` so they round-trip bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .program import Program, eval_program, parse_token, to_expression_string

MODEL_VERSION = 1


class ModelFormatError(ValueError):
    """A model file is malformed or does not match the feature schema."""


@dataclass(frozen=True)
class Model:
    program: Program
    slope: float = 1.0
    intercept: float = 0.0
    config_hash: str = ""
    seed: int = 0
    terminal_names: tuple[tuple[int, str], ...] = ()

    def raw(self, X) -> np.ndarray:
        return eval_program(self.program, np.asarray(X, dtype=np.float64))

    def mos(self, X) -> np.ndarray:
        return self.slope * self.raw(X) + self.intercept


def fit_mos_map(pred, mos) -> tuple[float, float]:
    """Least-squares ``mos ~ slope * pred + intercept``.

    Constant or non-finite predictions get slope 0 and the mean MOS.
    """
    pred = np.asarray(pred, dtype=np.float64)
    mos = np.asarray(mos, dtype=np.float64)
    if not np.all(np.isfinite(pred)) or np.ptp(pred) == 0:
        return 0.0, float(np.mean(mos))
    slope, intercept = np.polyfit(pred, mos, 1)
    return float(slope), float(intercept)


def format_model(model: Model, names: Sequence[str] | None = None) -> str:
    lines = [
        f"# symiqa-model {MODEL_VERSION}",
        f"# config_hash {model.config_hash}",
        f"# seed {model.seed}",
        f"# mos_map {model.slope!r} {model.intercept!r}",
    ]
    if names is not None:
        for idx in sorted(model.program.terminals()):
            lines.append(f"# terminal {idx} {names[idx]}")
    lines.append(f"# expression {to_expression_string(model.program, names)}")
    lines.extend(str(tok) for tok in model.program.tokens)
    return "\n".join(lines) + "\n"


def parse_model(text: str, names: Sequence[str] | None = None) -> Model:
    """Parse a model file; when ``names`` is given the recorded terminal
    names must match it."""
    header: dict[str, str] = {}
    terminals: list[tuple[int, str]] = []
    tokens = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(" ")
            if key == "terminal":
                idx, _, name = value.partition(" ")
                try:
                    terminals.append((int(idx), name.strip()))
                except ValueError:
                    raise ModelFormatError(f"line {lineno}: bad terminal entry {value!r}") from None
            else:
                header[key] = value.strip()
            continue
        try:
            tokens.append(parse_token(line))
        except (ValueError, KeyError) as exc:
            raise ModelFormatError(f"line {lineno}: {exc}") from None
    if header.get("symiqa-model") != str(MODEL_VERSION):
        raise ModelFormatError("missing or unsupported model version header")
    try:
        program = Program(tuple(tokens))
    except ValueError as exc:
        raise ModelFormatError(f"invalid program: {exc}") from None
    try:
        slope, intercept = (float(v) for v in header.get("mos_map", "1.0 0.0").split())
        seed = int(header.get("seed", "0"))
    except ValueError:
        raise ModelFormatError("bad mos_map or seed header") from None

    if names is not None:
        missing = [f"{i}:{n}" for i, n in terminals if i >= len(names) or names[i] != n]
        missing += [f"{i}:?" for i in sorted(program.terminals()) if i >= len(names)]
        if missing:
            raise ModelFormatError("model terminals not in feature schema: " + ", ".join(missing))
    return Model(program, slope, intercept, header.get("config_hash", ""), seed, tuple(terminals))


def save_model(path, model: Model, names: Sequence[str] | None = None) -> None:
    Path(path).write_text(format_model(model, names))


def load_model(path, names: Sequence[str] | None = None) -> Model:
    return parse_model(Path(path).read_text(), names)
