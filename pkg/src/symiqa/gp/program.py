"""Linear postfix programs: tokens, stack validity, evaluation and printing."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

DIV_GUARD = 1e-9
EXP_CAP = 50.0


def pdiv(a, b):
    """Protected division: ``a / b``, or 1 where ``|b| <= 1e-9``."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ok = np.abs(b) > DIV_GUARD
    out = np.where(ok, a / np.where(ok, b, 1.0), 1.0)
    return out if out.ndim else float(out)


def psqrt(a):
    out = np.sqrt(np.abs(a))
    return out if np.ndim(out) else float(out)


def plog(a):
    a = np.asarray(a, dtype=np.float64)
    ok = np.abs(a) > DIV_GUARD
    out = np.where(ok, np.log(np.where(ok, np.abs(a), 1.0)), 0.0)
    return out if out.ndim else float(out)


def pexp(a):
    out = np.exp(np.minimum(a, EXP_CAP))
    return out if np.ndim(out) else float(out)


class Operator(NamedTuple):
    arity: int
    func: Callable
    symbol: str | None  # infix symbol; None prints as a function call


OPERATORS: dict[str, Operator] = {
    "add": Operator(2, np.add, "+"),
    "sub": Operator(2, np.subtract, "-"),
    "mul": Operator(2, np.multiply, "*"),
    "pdiv": Operator(2, pdiv, None),
    "psqrt": Operator(1, psqrt, None),
    "plog": Operator(1, plog, None),
    "pexp": Operator(1, pexp, None),
}

OPERATOR_SETS: dict[str, tuple[str, ...]] = {
    "strict": ("add", "sub", "mul", "pdiv"),
    "extended": ("add", "sub", "mul", "pdiv", "psqrt"),
    "nonlinear": ("add", "sub", "mul", "pdiv", "psqrt", "plog", "pexp"),
}


class Token(NamedTuple):
    kind: str  # "T" terminal index, "C" constant, "O" operator name
    value: int | float | str

    def __str__(self) -> str:
        if self.kind == "C":
            return f"C {float(self.value)!r}"
        return f"{self.kind} {self.value}"


def terminal(index: int) -> Token:
    return Token("T", int(index))


def constant(value: float) -> Token:
    return Token("C", float(value))


def op(name: str) -> Token:
    if name not in OPERATORS:
        raise ValueError(f"unknown operator {name!r}")
    return Token("O", name)


def stack_effect(token: Token) -> tuple[int, int]:
    """``(required depth, depth change)`` for one token."""
    if token.kind == "O":
        arity = OPERATORS[token.value].arity
        return arity, 1 - arity
    return 0, 1


def is_valid(tokens: Sequence[Token], max_len: int | None = None, n_terminals: int | None = None) -> bool:
    """True when the postfix sequence never underflows and leaves one value."""
    if not tokens or (max_len is not None and len(tokens) > max_len):
        return False
    depth = 0
    for tok in tokens:
        if tok.kind == "T":
            if n_terminals is not None and not 0 <= tok.value < n_terminals:
                return False
        elif tok.kind == "C":
            if not np.isfinite(tok.value):
                return False
        elif tok.kind != "O" or tok.value not in OPERATORS:
            return False
        need, delta = stack_effect(tok)
        if depth < need:
            return False
        depth += delta
    return depth == 1


@dataclass(frozen=True)
class Program:
    tokens: tuple[Token, ...]

    def __post_init__(self):
        tokens = tuple(self.tokens)
        if not is_valid(tokens):
            raise ValueError(f"invalid postfix program: {[str(t) for t in tokens]}")
        object.__setattr__(self, "tokens", tokens)

    @property
    def complexity(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def terminals(self) -> set[int]:
        return {t.value for t in self.tokens if t.kind == "T"}


def eval_program(program: Program, x) -> float | np.ndarray:
    """Evaluate on one feature vector (returns a float) or a row matrix.

    ``x`` may be a ``FeatureVector``, a 1-D array or an ``(n, d)`` array.
    Protected operators absorb singularities; only floating-point overflow
    in ``add``/``mul`` chains can still produce ``inf``.
    """
    values = np.asarray(getattr(x, "values", x), dtype=np.float64)
    matrix = values.ndim == 2
    stack = []
    with np.errstate(all="ignore"):
        for tok in program.tokens:
            if tok.kind == "T":
                stack.append(values[:, tok.value] if matrix else values[tok.value])
            elif tok.kind == "C":
                stack.append(tok.value)
            else:
                oper = OPERATORS[tok.value]
                if oper.arity == 2:
                    b = stack.pop()
                    a = stack.pop()
                    stack.append(oper.func(a, b))
                else:
                    stack.append(oper.func(stack.pop()))
    result = stack[0]
    if matrix:
        return np.broadcast_to(np.asarray(result, dtype=np.float64), (values.shape[0],)).copy()
    return float(result)


def format_constant(value: float) -> str:
    return np.format_float_positional(float(value), trim="-")


def to_expression_string(program: Program, names: Sequence[str] | None = None) -> str:
    """Fully parenthesised infix; protected operators print as calls."""
    stack: list[str] = []
    for tok in program.tokens:
        if tok.kind == "T":
            stack.append(names[tok.value] if names is not None else f"x{tok.value}")
        elif tok.kind == "C":
            stack.append(format_constant(tok.value))
        else:
            oper = OPERATORS[tok.value]
            if oper.arity == 2:
                b = stack.pop()
                a = stack.pop()
                if oper.symbol:
                    stack.append(f"({a} {oper.symbol} {b})")
                else:
                    stack.append(f"{tok.value}({a}, {b})")
            else:
                stack.append(f"{tok.value}({stack.pop()})")
    return stack[0]


def parse_token(line: str) -> Token:
    kind, _, raw = line.strip().partition(" ")
    raw = raw.strip()
    if kind == "T":
        return terminal(int(raw))
    if kind == "C":
        return constant(float(raw))
    if kind == "O":
        return op(raw)
    raise ValueError(f"bad token line {line!r}")
