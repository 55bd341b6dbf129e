"""Stack-based genetic programming for symbolic quality models."""
from .config import ConfigError, EvolutionConfig, format_config, load_config, parse_config
from .evolve import EvolutionResult, evolve, select_final, warm_start
from .program import (
    OPERATOR_SETS,
    OPERATORS,
    Program,
    Token,
    constant,
    eval_program,
    is_valid,
    op,
    terminal,
    to_expression_string,
)
from .selection import FitnessRecord, dominates, fitness, pareto_tournament, select_parent
from .variation import TokenSampler, mutate, random_program, two_point_crossover

__all__ = [
    "ConfigError", "EvolutionConfig", "format_config", "load_config", "parse_config",
    "EvolutionResult", "evolve", "select_final", "warm_start",
    "OPERATOR_SETS", "OPERATORS", "Program", "Token", "constant", "eval_program",
    "is_valid", "op", "terminal", "to_expression_string",
    "FitnessRecord", "dominates", "fitness", "pareto_tournament", "select_parent",
    "TokenSampler", "mutate", "random_program", "two_point_crossover",
]
