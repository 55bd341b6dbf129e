"""Random initialisation, two-point crossover and stack mutations.

Every function returns a stack-valid :class:`Program` no longer than
``cfg.max_len``.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from .config import EvolutionConfig
from .program import OPERATORS, Program, Token, constant, is_valid, op, stack_effect, terminal

CROSSOVER_RETRIES = 20
SUBTREE_MAX = 3
# Chance that a growth mutation adds a unary operator rather than a binary one.
UNARY_GROWTH_PROB = 0.25
MUTATION_KINDS = ("point", "push", "trim", "insert")


class TokenSampler:
    """Draws leaves and operators for one terminal set and operator set."""

    def __init__(self, cfg: EvolutionConfig, terminals: Sequence[int]):
        if len(terminals) == 0:
            raise ValueError("terminal set is empty")
        self.cfg = cfg
        self.terminals = np.asarray(sorted(terminals), dtype=int)
        self.n_terminals = int(self.terminals.max()) + 1
        self.binary = [name for name in cfg.operators if OPERATORS[name].arity == 2]
        self.unary = [name for name in cfg.operators if OPERATORS[name].arity == 1]

    def leaf(self, rng: np.random.Generator) -> Token:
        if rng.random() < self.cfg.constant_prob:
            r = self.cfg.constant_range
            return constant(rng.uniform(-r, r))
        return terminal(self.terminals[rng.integers(len(self.terminals))])

    def operator(self, rng: np.random.Generator, arity: int) -> Token:
        pool = self.binary if arity == 2 else self.unary
        return op(pool[rng.integers(len(pool))])


@lru_cache(maxsize=None)
def _feasible(depth: int, remaining: int, unary: bool) -> bool:
    """Can ``remaining`` more tokens take the stack from ``depth`` to exactly 1?"""
    if remaining == 0:
        return depth == 1
    if depth - 1 > remaining:
        return False
    if _feasible(depth + 1, remaining - 1, unary):
        return True
    if unary and depth >= 1 and _feasible(depth, remaining - 1, unary):
        return True
    return depth >= 2 and _feasible(depth - 1, remaining - 1, unary)


def random_program(cfg: EvolutionConfig, sampler: TokenSampler, rng: np.random.Generator) -> Program:
    """Valid program with length drawn uniformly from ``[1, max_len // 2]``."""
    has_unary = bool(sampler.unary)
    upper = max(1, cfg.max_len // 2)
    while True:
        length = int(rng.integers(1, upper + 1))
        if _feasible(0, length, has_unary):
            break
    return Program(_random_tokens(sampler, rng, length))


def _random_tokens(sampler: TokenSampler, rng: np.random.Generator, length: int) -> tuple[Token, ...]:
    has_unary = bool(sampler.unary)
    tokens: list[Token] = []
    depth = 0
    for i in range(length):
        rest = length - i - 1
        moves = []
        if _feasible(depth + 1, rest, has_unary):
            moves.append(0)
        if has_unary and depth >= 1 and _feasible(depth, rest, has_unary):
            moves.append(1)
        if sampler.binary and depth >= 2 and _feasible(depth - 1, rest, has_unary):
            moves.append(2)
        move = moves[rng.integers(len(moves))]
        if move == 0:
            tokens.append(sampler.leaf(rng))
            depth += 1
        else:
            tokens.append(sampler.operator(rng, 1 if move == 1 else 2))
            depth -= move - 1
    return tuple(tokens)


def _depths(tokens: Sequence[Token]) -> list[int]:
    """Stack depth before each position (plus the final depth)."""
    out = [0]
    for tok in tokens:
        out.append(out[-1] + stack_effect(tok)[1])
    return out


def two_point_crossover(a: Program, b: Program, rng: np.random.Generator, max_len: int,
                        cuts: tuple[int, int, int, int] | None = None) -> Program:
    """Replace ``a[i:j]`` with ``b[k:l]``.

    Random cut points are chosen so the donated span has the same net stack
    effect as the removed one; up to 20 attempts, then ``a`` is returned.
    ``cuts`` forces ``(i, j, k, l)``.
    """
    ta, tb = a.tokens, b.tokens
    if cuts is not None:
        i, j, k, l = cuts
        child = ta[:i] + tb[k:l] + ta[j:]
        return Program(child) if is_valid(child, max_len) else a

    depth_a = _depths(ta)
    for _ in range(CROSSOVER_RETRIES):
        i = int(rng.integers(0, len(ta)))
        j = int(rng.integers(i + 1, len(ta) + 1))
        net = depth_a[j] - depth_a[i]
        available = depth_a[i]
        k = int(rng.integers(0, len(tb)))
        ends = []
        rel = need = 0
        for pos in range(k, len(tb)):
            req, delta = stack_effect(tb[pos])
            need = max(need, req - rel)
            rel += delta
            if rel == net and need <= available:
                ends.append(pos + 1)
        if not ends:
            continue
        l = ends[rng.integers(len(ends))]
        child = ta[:i] + tb[k:l] + ta[j:]
        if is_valid(child, max_len):
            return Program(child)
    return a


def _subtree_start(tokens: Sequence[Token], end: int) -> int:
    """Start index of the complete subexpression whose last token is ``end``."""
    net = 0
    for pos in range(end, -1, -1):
        net += stack_effect(tokens[pos])[1]
        if net == 1:
            return pos
    raise ValueError("no complete subexpression ends here")


def _point(tokens: list[Token], sampler: TokenSampler, rng: np.random.Generator) -> list[Token]:
    pos = int(rng.integers(len(tokens)))
    tok = tokens[pos]
    if tok.kind == "O":
        tokens[pos] = sampler.operator(rng, OPERATORS[tok.value].arity)
    elif tok.kind == "C" and rng.random() < 0.5:
        tokens[pos] = constant(tok.value + rng.normal(0.0, sampler.cfg.constant_jitter))
    else:
        tokens[pos] = sampler.leaf(rng)
    return tokens


def _small_subtree(sampler: TokenSampler, rng: np.random.Generator) -> list[Token]:
    """A leaf, or a random expression of at most ``SUBTREE_MAX`` tokens."""
    length = int(rng.integers(1, SUBTREE_MAX + 1))
    has_unary = bool(sampler.unary)
    while not _feasible(0, length, has_unary):
        length -= 1
    return list(_random_tokens(sampler, rng, length))


def _push(tokens: list[Token], sampler: TokenSampler, rng: np.random.Generator) -> list[Token]:
    if sampler.unary and (not sampler.binary or rng.random() < UNARY_GROWTH_PROB):
        return tokens + [sampler.operator(rng, 1)]
    operand, binop = _small_subtree(sampler, rng), sampler.operator(rng, 2)
    if rng.random() < 0.5:
        return tokens + operand + [binop]
    return operand + tokens + [binop]


def _trim(tokens: list[Token], rng: np.random.Generator) -> list[Token] | None:
    op_positions = [i for i, t in enumerate(tokens) if t.kind == "O"]
    if not op_positions:
        return None
    end = op_positions[rng.integers(len(op_positions))]
    start = _subtree_start(tokens, end)
    arity = OPERATORS[tokens[end].value].arity
    children = []
    child_end = end - 1
    for _ in range(arity):
        child_start = _subtree_start(tokens, child_end)
        children.append((child_start, child_end + 1))
        child_end = child_start - 1
    cs, ce = children[rng.integers(len(children))]
    return tokens[:start] + tokens[cs:ce] + tokens[end + 1:]


def _insert(tokens: list[Token], sampler: TokenSampler, rng: np.random.Generator) -> list[Token]:
    pos = int(rng.integers(1, len(tokens) + 1))
    if sampler.unary and (not sampler.binary or rng.random() < UNARY_GROWTH_PROB):
        new = [sampler.operator(rng, 1)]
    else:
        new = _small_subtree(sampler, rng) + [sampler.operator(rng, 2)]
    return tokens[:pos] + new + tokens[pos:]


def mutate(p: Program, sampler: TokenSampler, rng: np.random.Generator,
           kind: str | None = None) -> Program:
    """Apply one mutation kind (chosen uniformly unless ``kind`` is given).

    Falls back to point replacement when the chosen kind cannot apply
    (trimming a single token, or growth past ``max_len``).
    """
    max_len = sampler.cfg.max_len
    if kind is None:
        kind = MUTATION_KINDS[rng.integers(len(MUTATION_KINDS))]
    tokens = list(p.tokens)
    if kind == "push":
        out = _push(tokens, sampler, rng)
    elif kind == "trim":
        out = _trim(tokens, rng)
    elif kind == "insert":
        out = _insert(tokens, sampler, rng)
    elif kind == "point":
        out = None
    else:
        raise ValueError(f"unknown mutation kind {kind!r}")
    if out is None or not is_valid(out, max_len):
        out = _point(list(p.tokens), sampler, rng)
    return Program(tuple(out))
