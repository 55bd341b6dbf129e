"""Symbolic full-reference image quality assessment.

Feature maps from several classical quality models are summarised by AGGD
statistics and combined by stack-based genetic programming into compact,
readable quality formulas.
"""
from .aggd import FEATURE_INDEX, FEATURE_NAMES, AggdDescriptor, FeatureVector, describe, featurize
from .features import MapSet, extract_all
from .metrics import BUILTIN_PROGRAMS, bind_features, evoiqa_full, evoiqa_subset, haarpsi_score
from .stats import srocc

__version__ = "0.1.0"

__all__ = [
    "FEATURE_INDEX", "FEATURE_NAMES", "AggdDescriptor", "FeatureVector", "describe", "featurize",
    "MapSet", "extract_all",
    "BUILTIN_PROGRAMS", "bind_features", "evoiqa_full", "evoiqa_subset", "haarpsi_score",
    "srocc", "__version__",
]
