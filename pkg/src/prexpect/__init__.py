"""Expectation transformers, expected runtimes and proof rules for
probabilistic programs with recursive procedures."""
from .errors import (ConfigLimitExceeded, DomainViolation, ElaborationError, ParseError,
                     PrexpectError, SpaceMismatch)
from .estimators import ErtEstimator, WlpEstimator, WpEstimator
from .parser import parse_expectation, parse_program, to_source
from .rules import RuleClaim, Verdict, check
from .semantics import Expectation, StateSpace
from .transformers import CostModel, ert, wlp, wp

__version__ = "0.1.0"

__all__ = [
    "ConfigLimitExceeded", "CostModel", "DomainViolation", "ElaborationError", "ErtEstimator",
    "Expectation", "ParseError", "PrexpectError", "RuleClaim", "SpaceMismatch", "StateSpace",
    "Verdict", "WlpEstimator", "WpEstimator", "check", "ert", "parse_expectation",
    "parse_program", "to_source", "wlp", "wp",
]
