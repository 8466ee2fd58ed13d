"""Finite state spaces, expression evaluation and expectation vectors.

States are enumerated in mixed radix with the first declared variable
varying fastest.  Expectations are dense float vectors over that
enumeration with values in ``[0, inf]``; products follow ``0 * inf = 0``.
"""
from __future__ import annotations

import json
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from . import dsl
from .errors import DomainViolation, ElaborationError, SpaceMismatch
from .syntax import (
    And, ArrayPred, BinOp, BoolLit, Cmp, Index, IndexSym, Lit, Neg, Not, Or,
    Program, Var, VarDecl,
)

INF = float("inf")

#: Tags for the three carriers of expectations.
UNBOUNDED, ONE_BOUNDED, RUNTIME = "E", "E<=1", "T"


class StateSpace:
    """All valuations of the declared variables, with parameters bound."""

    def __init__(self, vars: Sequence[VarDecl], bindings: Optional[Mapping] = None,
                 params: Sequence = ()):
        self.vars: Tuple[VarDecl, ...] = tuple(vars)
        for v in self.vars:
            if v.lo > v.hi:
                raise ElaborationError(f"empty domain for variable {v.name!r}")
        self.names = [v.name for v in self.vars]
        self.radices = [v.hi - v.lo + 1 for v in self.vars]
        self.strides = []
        s = 1
        for r in self.radices:
            self.strides.append(s)
            s *= r
        self.size = s
        self.bindings: Dict[str, Union[int, np.ndarray]] = {}
        bindings = dict(bindings or {})
        for p in params:
            if p.name not in bindings:
                raise ElaborationError(f"parameter {p.name!r} is not bound")
            val = bindings[p.name]
            if p.kind == "array":
                arr = np.asarray(val, dtype=np.int64)
                if arr.ndim != 1:
                    raise ElaborationError(f"parameter {p.name!r} must be a flat integer array")
                arr.setflags(write=False)
                self.bindings[p.name] = arr
            else:
                if not isinstance(val, (int, np.integer)):
                    raise ElaborationError(f"parameter {p.name!r} must be an integer")
                self.bindings[p.name] = int(val)
        idx = np.arange(self.size, dtype=np.int64)
        self._columns: Dict[str, np.ndarray] = {}
        for v, stride, radix in zip(self.vars, self.strides, self.radices):
            col = (idx // stride) % radix + v.lo
            col.setflags(write=False)
            self._columns[v.name] = col

    def _key(self):
        binds = tuple(sorted((k, tuple(v.tolist()) if isinstance(v, np.ndarray) else v)
                             for k, v in self.bindings.items()))
        return self.vars, binds

    def __eq__(self, other):
        if not isinstance(other, StateSpace):
            return NotImplemented
        return self is other or self._key() == other._key()

    def __hash__(self):
        return hash(self._key())

    @classmethod
    def of(cls, prog: Program, bindings: Optional[Mapping] = None) -> "StateSpace":
        return cls(prog.vars, bindings, prog.params)

    def column(self, name: str) -> np.ndarray:
        """Value of variable ``name`` in every state."""
        return self._columns[name]

    def decl(self, name: str) -> VarDecl:
        return self.vars[self.names.index(name)]

    def index_of(self, state: Mapping[str, int]) -> int:
        i = 0
        for v, stride in zip(self.vars, self.strides):
            val = state[v.name]
            if not v.lo <= val <= v.hi:
                raise DomainViolation(f"{v.name} = {val} outside {v.lo}..{v.hi}", dict(state), val)
            i += (val - v.lo) * stride
        return i

    def state(self, i: int) -> Dict[str, int]:
        return {n: int(self._columns[n][i]) for n in self.names}

    def states(self) -> Iterable[Dict[str, int]]:
        for i in range(self.size):
            yield self.state(i)

    def compatible(self, other: "StateSpace") -> bool:
        if self is other:
            return True
        same_arrays = self.bindings.keys() == other.bindings.keys() and all(
            np.array_equal(self.bindings[k], other.bindings[k]) for k in self.bindings)
        return self.vars == other.vars and same_arrays

    def spec(self) -> List[dict]:
        return [{"name": v.name, "lo": v.lo, "hi": v.hi} for v in self.vars]

    def __repr__(self):
        doms = ", ".join(f"{v.name}:{v.lo}..{v.hi}" for v in self.vars)
        return f"StateSpace({doms}; size={self.size})"


# -- vectorized evaluation -----------------------------------------------------
# Each evaluator returns (values, fault) where ``fault`` marks states on which
# the expression is undefined (array index out of bounds, modulo by zero).

def eval_int_vec(e, sp: StateSpace, index_value: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    n = sp.size
    if isinstance(e, Lit):
        return np.full(n, e.value, dtype=np.int64), np.zeros(n, bool)
    if isinstance(e, Var):
        if e.name in sp._columns:
            return sp.column(e.name), np.zeros(n, bool)
        if e.name in sp.bindings and not isinstance(sp.bindings[e.name], np.ndarray):
            return np.full(n, sp.bindings[e.name], dtype=np.int64), np.zeros(n, bool)
        raise ElaborationError(f"unknown identifier {e.name!r}")
    if isinstance(e, IndexSym):
        if index_value is None:
            raise ElaborationError("expression mentions the index symbol 'n' but no index value was given")
        return np.full(n, index_value, dtype=np.int64), np.zeros(n, bool)
    if isinstance(e, Index):
        arr = sp.bindings.get(e.array)
        if not isinstance(arr, np.ndarray):
            raise ElaborationError(f"{e.array!r} is not a bound array parameter")
        i, f = eval_int_vec(e.index, sp, index_value)
        bad = (i < 0) | (i >= len(arr))
        out = np.zeros(n, dtype=np.int64)
        if len(arr):
            out[~bad] = arr[i[~bad]]
        return out, f | bad
    if isinstance(e, Neg):
        v, f = eval_int_vec(e.operand, sp, index_value)
        return -v, f
    if isinstance(e, BinOp):
        a, fa = eval_int_vec(e.left, sp, index_value)
        b, fb = eval_int_vec(e.right, sp, index_value)
        f = fa | fb
        if e.op == "+":
            return a + b, f
        if e.op == "-":
            return a - b, f
        if e.op == "*":
            return a * b, f
        if e.op == "min":
            return np.minimum(a, b), f
        if e.op == "max":
            return np.maximum(a, b), f
        if e.op == "%":
            zero = b == 0
            safe = np.where(zero, 1, b)
            return np.where(zero, 0, np.mod(a, safe)), f | zero
    raise TypeError(f"not an integer expression: {e!r}")


_CMP = {
    "<": np.less, "<=": np.less_equal, ">": np.greater, ">=": np.greater_equal,
    "=": np.equal, "!=": np.not_equal,
}


def eval_bool_vec(b, sp: StateSpace, index_value: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Boolean guards; ``&&`` and ``||`` short-circuit left to right."""
    n = sp.size
    if isinstance(b, BoolLit):
        return np.full(n, b.value), np.zeros(n, bool)
    if isinstance(b, Cmp):
        x, fx = eval_int_vec(b.left, sp, index_value)
        y, fy = eval_int_vec(b.right, sp, index_value)
        return _CMP[b.op](x, y), fx | fy
    if isinstance(b, Not):
        v, f = eval_bool_vec(b.operand, sp, index_value)
        return ~v, f
    if isinstance(b, And):
        lv, lf = eval_bool_vec(b.left, sp, index_value)
        rv, rf = eval_bool_vec(b.right, sp, index_value)
        return lv & rv, lf | (lv & rf)
    if isinstance(b, Or):
        lv, lf = eval_bool_vec(b.left, sp, index_value)
        rv, rf = eval_bool_vec(b.right, sp, index_value)
        return lv | rv, lf | (~lv & rf)
    if isinstance(b, ArrayPred):
        return _array_pred_vec(b, sp, index_value)
    raise TypeError(f"not a boolean expression: {b!r}")


def _array_pred_vec(b: ArrayPred, sp: StateSpace, index_value):
    arr = sp.bindings.get(b.array)
    if not isinstance(arr, np.ndarray):
        raise ElaborationError(f"{b.array!r} is not a bound array parameter")
    cols = [eval_int_vec(a, sp, index_value) for a in b.args]
    fault = np.zeros(sp.size, bool)
    for _, f in cols:
        fault |= f
    vals = [c for c, _ in cols]
    out = np.zeros(sp.size, bool)
    # the segment a[i..j] is clipped to the array; an empty segment is sorted
    # and contains nothing
    for k in range(sp.size):
        if fault[k]:
            continue
        i, j = int(vals[0][k]), int(vals[1][k])
        seg = arr[max(i, 0):min(j, len(arr) - 1) + 1] if j >= i else arr[:0]
        if b.pred == "sorted":
            out[k] = bool(np.all(seg[:-1] <= seg[1:]))
        else:
            out[k] = bool(np.any(seg == vals[2][k]))
    return out, fault


def _first_fault(fault: np.ndarray, sp: StateSpace, what: str):
    if fault.any():
        k = int(np.argmax(fault))
        raise DomainViolation(f"{what} undefined at state {sp.state(k)}", sp.state(k))


# -- scalar evaluation ---------------------------------------------------------

def eval_int(e, state: Mapping[str, int], sp: StateSpace, index_value: Optional[int] = None) -> int:
    """Value of an integer expression at one state."""
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Var):
        if e.name in state:
            return state[e.name]
        val = sp.bindings.get(e.name)
        if isinstance(val, int):
            return val
        raise ElaborationError(f"unknown identifier {e.name!r}")
    if isinstance(e, IndexSym):
        if index_value is None:
            raise ElaborationError("missing value for the index symbol 'n'")
        return index_value
    if isinstance(e, Index):
        arr = sp.bindings[e.array]
        i = eval_int(e.index, state, sp, index_value)
        if not 0 <= i < len(arr):
            raise DomainViolation(f"index {i} out of bounds for {e.array} (length {len(arr)})", dict(state), i)
        return int(arr[i])
    if isinstance(e, Neg):
        return -eval_int(e.operand, state, sp, index_value)
    if isinstance(e, BinOp):
        a = eval_int(e.left, state, sp, index_value)
        b = eval_int(e.right, state, sp, index_value)
        if e.op == "%":
            if b == 0:
                raise DomainViolation("modulo by zero", dict(state), 0)
            return a % b
        return {"+": a + b, "-": a - b, "*": a * b, "min": min(a, b), "max": max(a, b)}[e.op]
    raise TypeError(f"not an integer expression: {e!r}")


def eval_bool(b, state: Mapping[str, int], sp: StateSpace, index_value: Optional[int] = None) -> bool:
    if isinstance(b, BoolLit):
        return b.value
    if isinstance(b, Cmp):
        x = eval_int(b.left, state, sp, index_value)
        y = eval_int(b.right, state, sp, index_value)
        return bool(_CMP[b.op](x, y))
    if isinstance(b, Not):
        return not eval_bool(b.operand, state, sp, index_value)
    if isinstance(b, And):
        return eval_bool(b.left, state, sp, index_value) and eval_bool(b.right, state, sp, index_value)
    if isinstance(b, Or):
        return eval_bool(b.left, state, sp, index_value) or eval_bool(b.right, state, sp, index_value)
    if isinstance(b, ArrayPred):
        arr = sp.bindings[b.array]
        args = [eval_int(a, state, sp, index_value) for a in b.args]
        i, j = args[0], args[1]
        seg = arr[max(i, 0):min(j, len(arr) - 1) + 1] if j >= i else arr[:0]
        if b.pred == "sorted":
            return bool(np.all(seg[:-1] <= seg[1:]))
        return bool(np.any(seg == args[2]))
    raise TypeError(f"not a boolean expression: {b!r}")


# -- extended arithmetic -------------------------------------------------------

def ext_mul(a, b):
    """Pointwise product on [0, inf] with ``0 * inf = 0``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where((a == 0) | (b == 0), 0.0, a * b)


def ext_monus(a, b):
    """Truncated subtraction on [0, inf]; ``inf - inf`` is taken as 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        return np.where(np.isinf(b), 0.0, np.maximum(a - b, 0.0))


def harmonic(k) -> np.ndarray:
    """Vectorized harmonic numbers with ``H_k = 0`` for ``k <= 0``."""
    k = np.asarray(k, dtype=np.int64)
    top = int(max(k.max(initial=0), 0))
    table = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, top + 1))])
    return np.where(k > 0, table[np.clip(k, 0, top)], 0.0)


# -- expectations --------------------------------------------------------------

class Expectation:
    """Immutable vector of values in [0, inf] over a state space."""

    __slots__ = ("space", "values", "tag")

    def __init__(self, space: StateSpace, values, tag: str = UNBOUNDED):
        vals = np.array(values, dtype=float).reshape(-1)
        if vals.shape[0] != space.size:
            raise SpaceMismatch(f"vector of length {vals.shape[0]} for a space of size {space.size}")
        if np.isnan(vals).any() or (vals < 0).any():
            raise ValueError("expectation values must lie in [0, inf]")
        if tag == ONE_BOUNDED and (vals > 1 + 1e-12).any():
            raise ValueError("one-bounded expectation has an entry above 1")
        vals.setflags(write=False)
        self.space = space
        self.values = vals
        self.tag = tag

    @classmethod
    def constant(cls, space: StateSpace, c: float, tag: str = UNBOUNDED) -> "Expectation":
        return cls(space, np.full(space.size, float(c)), tag)

    def retag(self, tag: str) -> "Expectation":
        return Expectation(self.space, self.values, tag)

    def at(self, state: Union[int, Mapping[str, int]]) -> float:
        i = state if isinstance(state, (int, np.integer)) else self.space.index_of(state)
        return float(self.values[i])

    def __len__(self):
        return self.space.size

    def __repr__(self):
        return f"Expectation({self.tag}, {np.array2string(self.values, threshold=8)})"

    def to_json(self) -> dict:
        return {
            "space": self.space.spec(),
            "values": [("inf" if np.isinf(v) else float(v)) for v in self.values],
        }

    @classmethod
    def from_json(cls, data, space: Optional[StateSpace] = None) -> "Expectation":
        if isinstance(data, str):
            data = json.loads(data)
        if space is None:
            space = StateSpace([VarDecl(d["name"], d["lo"], d["hi"]) for d in data["space"]])
        vals = [INF if v == "inf" else float(v) for v in data["values"]]
        return cls(space, vals)


def _check_same(f: Expectation, g: Expectation):
    if not f.space.compatible(g.space):
        raise SpaceMismatch("expectations live on different state spaces")


def leq_witness(f: Expectation, g: Expectation, tol: float = 0.0) -> Optional[int]:
    """Index of a state with ``f > g + tol``, or None if ``f <= g`` pointwise."""
    _check_same(f, g)
    a, b = f.values, g.values
    ok = (a <= b + tol) | np.isinf(b)
    if ok.all():
        return None
    return int(np.argmin(ok))


def leq(f: Expectation, g: Expectation, tol: float = 0.0) -> bool:
    return leq_witness(f, g, tol) is None


def add(f: Expectation, g: Expectation) -> Expectation:
    _check_same(f, g)
    return Expectation(f.space, f.values + g.values, f.tag)


def scale(c: float, f: Expectation) -> Expectation:
    if c < 0:
        raise ValueError("scalar must be non-negative")
    return Expectation(f.space, ext_mul(c, f.values), f.tag)


def pointwise_mul(f: Expectation, g: Expectation) -> Expectation:
    _check_same(f, g)
    return Expectation(f.space, ext_mul(f.values, g.values), f.tag)


def sup_pointwise(*fs: Expectation) -> Expectation:
    for g in fs[1:]:
        _check_same(fs[0], g)
    return Expectation(fs[0].space, np.max([f.values for f in fs], axis=0), fs[0].tag)


def inf_pointwise(*fs: Expectation) -> Expectation:
    for g in fs[1:]:
        _check_same(fs[0], g)
    return Expectation(fs[0].space, np.min([f.values for f in fs], axis=0), fs[0].tag)


def eval_expectation_values(e, sp: StateSpace, index_value: Optional[int] = None,
                            _prev: Optional[np.ndarray] = None) -> np.ndarray:
    n = sp.size
    if isinstance(e, dsl.ELit):
        return np.full(n, float(e.value))
    if isinstance(e, dsl.EIverson):
        v, f = eval_bool_vec(e.guard, sp, index_value)
        _first_fault(f, sp, "guard")
        return v.astype(float)
    if isinstance(e, dsl.ELift):
        v, f = eval_int_vec(e.expr, sp, index_value)
        _first_fault(f, sp, "integer term")
        return np.maximum(v, 0).astype(float)
    if isinstance(e, dsl.EHarmonic):
        v, f = eval_int_vec(e.arg, sp, index_value)
        _first_fault(f, sp, "harmonic argument")
        return harmonic(v)
    if isinstance(e, dsl.EPow):
        k, f = eval_int_vec(e.exponent, sp, index_value)
        _first_fault(f, sp, "pow exponent")
        with np.errstate(divide="ignore"):
            return np.power(float(e.base), k.astype(float))
    if isinstance(e, dsl.EPrev):
        if _prev is None:
            raise ElaborationError("'prev' outside recur")
        return _prev
    if isinstance(e, dsl.ERecur):
        k, f = eval_int_vec(e.count, sp, index_value)
        _first_fault(f, sp, "recur count")
        cur = eval_expectation_values(e.init, sp, index_value, _prev)
        for step in range(int(k.max(initial=0))):
            nxt = eval_expectation_values(e.step, sp, index_value, cur)
            cur = np.where(step < k, nxt, cur)
        return cur
    if isinstance(e, dsl.EBin):
        a = eval_expectation_values(e.left, sp, index_value, _prev)
        b = eval_expectation_values(e.right, sp, index_value, _prev)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return ext_monus(a, b)
        if e.op == "*":
            return ext_mul(a, b)
        if e.op == "/":
            return a / b
        if e.op == "min":
            return np.minimum(a, b)
        if e.op == "max":
            return np.maximum(a, b)
    raise TypeError(f"not an expectation expression: {e!r}")


def eval_expectation(e, sp: StateSpace, index_value: Optional[int] = None,
                     tag: str = UNBOUNDED) -> Expectation:
    if dsl.mentions_index(e) and index_value is None:
        raise ElaborationError("expectation mentions 'n'; an index value is required")
    return Expectation(sp, eval_expectation_values(e, sp, index_value), tag)


def assignment_targets(sp: StateSpace, var: str, expr, index_value=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """For ``var := expr``: successor index per state, a fault mask, and the assigned values.

    Faulty states (undefined expression or value outside the domain) get
    their own index as a placeholder target.
    """
    v = sp.decl(var)
    vals, fault = eval_int_vec(expr, sp, index_value)
    fault = fault | (vals < v.lo) | (vals > v.hi)
    stride = sp.strides[sp.names.index(var)]
    idx = np.arange(sp.size, dtype=np.int64)
    target = np.where(fault, idx, idx + (vals - sp.column(var)) * stride)
    return target, fault, vals


def substitute_in_expectation(f: Expectation, var: str, expr, sp: Optional[StateSpace] = None) -> Expectation:
    """``f[var/expr]``; raises DomainViolation if the assignment can leave the domain."""
    sp = sp or f.space
    target, fault, vals = assignment_targets(sp, var, expr)
    if fault.any():
        k = int(np.argmax(fault))
        raise DomainViolation(f"{var} := {int(vals[k])} leaves its domain at state {sp.state(k)}",
                              sp.state(k), int(vals[k]))
    return Expectation(f.space, f.values[target], f.tag)
