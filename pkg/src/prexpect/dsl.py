"""Expression trees of the expectation DSL.

Expectations denote maps from states to ``[0, inf]``.  Subtraction is monus
(truncated at zero), integer-valued atoms are lifted with clamping at zero,
and multiplication uses ``0 * inf = 0``, so every tree is total.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .syntax import BoolExpr, IndexSym, IntExpr

INF = float("inf")


@dataclass(frozen=True)
class ELit:
    value: Union[Fraction, float]  # a non-negative Fraction, or INF


@dataclass(frozen=True)
class EIverson:
    guard: BoolExpr


@dataclass(frozen=True)
class ELift:
    """Integer expression used as an expectation, clamped at zero."""
    expr: IntExpr


@dataclass(frozen=True)
class EBin:
    op: str  # + - * / min max   ('-' is monus, '/' needs a constant divisor)
    left: "ExpectationExpr"
    right: "ExpectationExpr"


@dataclass(frozen=True)
class EHarmonic:
    """``H_k = 1 + 1/2 + ... + 1/k``; zero for ``k <= 0``."""
    arg: IntExpr


@dataclass(frozen=True)
class EPow:
    base: Fraction
    exponent: IntExpr


@dataclass(frozen=True)
class ERecur:
    """``recur(k, init, step)``: apply ``step`` (which may mention ``prev``) k times to ``init``."""
    count: IntExpr
    init: "ExpectationExpr"
    step: "ExpectationExpr"


@dataclass(frozen=True)
class EPrev:
    pass


ExpectationExpr = Union[ELit, EIverson, ELift, EBin, EHarmonic, EPow, ERecur, EPrev]


def mentions_index(e) -> bool:
    """True when the tree refers to the free index symbol ``n``."""
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, IndexSym):
            return True
        if hasattr(node, "__dataclass_fields__"):
            for name in node.__dataclass_fields__:
                child = getattr(node, name)
                if isinstance(child, tuple):
                    stack.extend(child)
                elif hasattr(child, "__dataclass_fields__"):
                    stack.append(child)
    return False
