"""Checker for the recursion proof rules.

A rule premise says: assuming a bound on the call, the body satisfies the
bound.  The checker replays the body's transformer structurally over the
state space.  Whenever the replay reaches ``call P`` with some intermediate
post-expectation ``h``, it looks ``h`` up in an assumption table: ``h`` must
be ``c * key + k`` for a table key of ``P``, ``c, k >= 0`` constants, and the
call's value is bounded by a formula that is sound for the transformer at
hand (linearity for wp, the wlp/wp duality for wlp, and the decomposition
``ert(t) = ert(0) + wp(t)`` for ert).  Anything else is reported as
inconclusive rather than guessed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import ElaborationError
from .parser import expectation_to_source, parse_expectation
from .semantics import INF, Expectation, StateSpace, eval_expectation, ext_mul
from .syntax import Program, program_abort_free
from .transformers import CostModel, transform_vec

RULES = ("wp-rec", "wlp-rec", "wp-rec-omega", "wlp-rec-omega", "ert-rec", "ert-rec-omega")
_MODE = {"wp-rec": "wp", "wlp-rec": "wlp", "ert-rec": "ert",
         "wp-rec-omega": "wp", "wlp-rec-omega": "wlp", "ert-rec-omega": "ert"}


@dataclass
class RuleClaim:
    """A premise to check.  Expressions may be DSL strings or parsed trees.

    ``bound`` is ``g`` (or ``u`` for runtimes) of the single-step rules.  The
    omega rules take index families ``lower``/``upper`` mentioning ``n``; a
    missing family defaults to the trivial one (0 or inf, resp. 1 for wlp).
    """
    rule: str
    proc: Union[str, Sequence[str]]
    post: object = "0"
    bound: object = None
    lower: object = None
    upper: object = None
    depth: int = 10

    def __post_init__(self):
        if self.rule not in RULES:
            raise ElaborationError(f"unknown rule {self.rule!r}; expected one of {', '.join(RULES)}")

    @property
    def mode(self) -> str:
        return _MODE[self.rule]

    @property
    def omega(self) -> bool:
        return self.rule.endswith("omega")

    @classmethod
    def from_dict(cls, d: Mapping) -> "RuleClaim":
        known = {"rule", "proc", "post", "bound", "lower", "upper", "depth"}
        extra = set(d) - known
        if extra:
            raise ElaborationError(f"unknown claim fields: {sorted(extra)}")
        return cls(**{k: d[k] for k in d})


@dataclass
class Verdict:
    status: str  # accepted, rejected, inconclusive, checked
    proc: Optional[str] = None
    witness: Optional[Dict[str, int]] = None
    lhs: Optional[float] = None
    rhs: Optional[float] = None
    side: Optional[str] = None
    step: Optional[int] = None
    depth: Optional[int] = None
    reason: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.status in ("accepted", "checked")

    def to_json(self) -> dict:
        out = {"status": self.status}
        for k in ("proc", "witness", "lhs", "rhs", "side", "step", "depth", "reason"):
            v = getattr(self, k)
            if v is not None:
                out[k] = "inf" if isinstance(v, float) and np.isinf(v) else v
        return out

    def __str__(self):
        if self.status == "checked":
            return f"CheckedUpTo({self.depth})"
        if self.status == "rejected" and self.step == 0 and self.reason:
            return f"Rejected at n=0: {self.reason} ({self.side} is {self.lhs:.6g} at {self.witness})"
        if self.status == "rejected":
            at = f" at n={self.step}" if self.step is not None else ""
            return (f"Rejected{at}: {self.side} bound fails at {self.witness} "
                    f"(replayed {self.lhs:.6g} vs bound {self.rhs:.6g})")
        if self.status == "inconclusive":
            return f"Inconclusive: {self.reason}"
        return "Accepted"


_MASK_NOTE = "calls are assumed never to return into states where the continuation faults"


class _Unmatched(Exception):
    def __init__(self, proc: str, h: np.ndarray, why: str):
        self.proc, self.h, self.why = proc, h, why
        super().__init__(why)


def _is_const(v: np.ndarray, tol: float) -> bool:
    fin = v[np.isfinite(v)]
    return len(fin) == len(v) and (len(v) == 0 or fin.max() - fin.min() <= tol)


class AssumptionEnv:
    """Table of assumed bounds on procedure calls, with a sound closure.

    Entries are ``(proc, key, lower, upper)`` vectors; lookup scans the
    entries of a procedure in insertion order.
    """

    def __init__(self, mode: str, abort_free: bool = False, call_tick: float = 1.0, tol: float = 1e-9):
        self.mode = mode
        self.abort_free = abort_free
        self.call_tick = call_tick
        self.tol = tol
        self.masked = False
        self.entries: List[Tuple[str, np.ndarray, np.ndarray, np.ndarray]] = []

    def add(self, proc: str, key: np.ndarray, lower: Optional[np.ndarray] = None,
            upper: Optional[np.ndarray] = None):
        n = len(key)
        lo = np.zeros(n) if lower is None else np.asarray(lower, float)
        if upper is None:
            upper = np.ones(n) if self.mode == "wlp" else np.full(n, INF)
        self.entries.append((proc, np.asarray(key, float), lo, np.asarray(upper, float)))

    def _decompositions(self, key: np.ndarray, h: np.ndarray) -> List[Tuple[float, float]]:
        """Candidate (c, k) with h = c * key + k, c, k >= 0."""
        tol = self.tol
        if not (np.isfinite(key).all() and np.isfinite(h).all()):
            # only exact multiples survive infinite entries
            fin = np.isfinite(key) & np.isfinite(h)
            if not np.array_equal(np.isinf(key), np.isinf(h)) or not fin.any():
                return []
            key, h = key[fin], h[fin]
        if _is_const(key, tol):
            if not _is_const(h, tol):
                return []
            k0, h0 = float(key.mean()), float(h.mean())
            cands = []
            if k0 > tol:
                cands.append((h0 / k0, 0.0))
            if h0 >= k0 - tol:
                cands.append((1.0, max(h0 - k0, 0.0)))
            if k0 <= tol:
                cands.append((0.0, h0))
            return cands
        i, j = int(np.argmax(key)), int(np.argmin(key))
        c = (h[i] - h[j]) / (key[i] - key[j])
        k = h[j] - c * key[j]
        if c < -tol or k < -tol:
            return []
        c, k = max(c, 0.0), max(k, 0.0)
        if np.max(np.abs(c * key + k - h)) > tol * (1 + np.max(np.abs(h))):
            return []
        return [(c, k)]

    def _bound(self, side: str, c: float, k: float, lo: np.ndarray, up: np.ndarray) -> Optional[np.ndarray]:
        m = self.mode
        if m == "wp":
            return ext_mul(c, up) + k if side == "upper" else ext_mul(c, lo)
        if m == "wlp":
            if side == "lower":
                return np.maximum(ext_mul(c, lo) + min(1.0 - c, k), 0.0)
            return np.minimum(ext_mul(c, up) + max(1.0 - c, k), 1.0)
        # runtimes: ert(c*K + k) = ert(0) + c*wp(K) + k*wp(1)
        if side == "upper":
            return ext_mul(c, up) + k if c >= 1.0 - self.tol else None
        if c > 1.0 + self.tol:
            return None
        # k * wp(1) >= k needs almost-sure termination; without abort every
        # diverging run makes infinitely many calls, so a positive call tick
        # already makes the runtime infinite there.
        sure = self.abort_free and self.call_tick > 0
        return ext_mul(c, lo) + (k if sure else 0.0)

    def lookup(self, proc: str, h: np.ndarray, side: str) -> np.ndarray:
        # NaN marks states where the continuation after the call faults.  The
        # fit ignores them: a call that can return there makes the program
        # itself faulty, which the engines report separately.
        live = ~np.isnan(h)
        if not live.any():
            raise _Unmatched(proc, h, "the continuation after the call faults everywhere")
        if not live.all():
            self.masked = True
        for p, key, lo, up in self.entries:
            if p != proc:
                continue
            for c, k in self._decompositions(key[live], h[live]):
                b = self._bound(side, c, k, lo, up)
                if b is not None:
                    return b
        raise _Unmatched(proc, h, f"no assumption on call {proc} matches the post-expectation")


def _space_for(prog: Program, space: Optional[StateSpace]) -> StateSpace:
    return space if space is not None else StateSpace.of(prog)


def _vec(expr, prog: Program, sp: StateSpace, index: Optional[int] = None) -> np.ndarray:
    if isinstance(expr, Expectation):
        return expr.values
    if isinstance(expr, (int, float)):
        return np.full(sp.size, float(expr))
    tree = parse_expectation(expr, prog, allow_index=index is not None) if isinstance(expr, str) else expr
    return eval_expectation(tree, sp, index).values


def _show(expr) -> str:
    if isinstance(expr, str):
        return expr
    try:
        return expectation_to_source(expr)
    except TypeError:
        return repr(expr)


def _replay(prog: Program, sp: StateSpace, proc: str, mode: str, post: np.ndarray,
            table: AssumptionEnv, side: str, cost: CostModel) -> np.ndarray:
    call = lambda p, h: table.lookup(p, h, side)
    return transform_vec(prog.body(proc), sp, mode, post, call, cost)


def _compare(pre: np.ndarray, bound: np.ndarray, side: str, tol: float) -> Optional[int]:
    """Index of the first state where ``pre`` violates the bound on ``side``."""
    if side == "upper":
        ok = (pre <= bound + tol) | np.isinf(bound)
    else:
        ok = (pre >= bound - tol) | np.isinf(pre)
    return None if ok.all() else int(np.argmin(ok))


def _inconclusive(err: _Unmatched, sp: StateSpace, proc: str, step=None) -> Verdict:
    h = err.h
    shown = np.array2string(h, threshold=6, precision=6)
    return Verdict("inconclusive", proc=proc, step=step, reason=f"{err.why}: h = {shown}")


def _table(prog: Program, mode: str, cost: CostModel, tol: float) -> AssumptionEnv:
    return AssumptionEnv(mode, abort_free=program_abort_free(prog), call_tick=cost.call, tol=tol)


def check_rec(prog: Program, claims: Sequence[RuleClaim], space: Optional[StateSpace] = None,
              tol: float = 1e-9, cost: Optional[CostModel] = None) -> Verdict:
    """Single-step rules, possibly over several procedures at once.

    All claims seed one shared table; every claim is then replayed.
    """
    sp = _space_for(prog, space)
    cost = CostModel.parse(cost)
    claims = list(claims)
    if not claims:
        raise ElaborationError("no claims given")
    rule = claims[0].rule
    if any(c.rule != rule for c in claims) or claims[0].omega:
        raise ElaborationError("simultaneous checks need claims of one non-omega rule")
    mode = claims[0].mode
    side = "lower" if mode == "wlp" else "upper"
    table = _table(prog, mode, cost, tol)
    prepared = []
    for cl in claims:
        if cl.bound is None:
            raise ElaborationError(f"claim on {cl.proc} has no bound")
        prog.body(cl.proc)
        post = _vec(cl.post, prog, sp)
        bound = _vec(cl.bound, prog, sp)
        if mode == "wlp" and ((post > 1 + tol).any() or (bound > 1 + tol).any()):
            raise ElaborationError("wlp claims need one-bounded expectations")
        if mode == "ert":
            table.add(cl.proc, post, upper=bound + cost.call)
        elif mode == "wlp":
            table.add(cl.proc, post, lower=bound)
        else:
            table.add(cl.proc, post, upper=bound)
        prepared.append((cl, post, bound))
    for cl, post, bound in prepared:
        try:
            pre = _replay(prog, sp, cl.proc, mode, post, table, side, cost)
        except _Unmatched as err:
            return _inconclusive(err, sp, cl.proc)
        if np.isnan(pre).any():
            k = int(np.argmax(np.isnan(pre)))
            return Verdict("inconclusive", proc=cl.proc, witness=sp.state(k),
                           reason="a runtime fault is reachable in the body")
        bad = _compare(pre, bound, side, tol)
        if bad is not None:
            return Verdict("rejected", proc=cl.proc, witness=sp.state(bad), lhs=float(pre[bad]),
                           rhs=float(bound[bad]), side=side)
    return Verdict("accepted", proc=claims[0].proc if len(claims) == 1 else None,
                   reason=_MASK_NOTE if table.masked else None)


def check_wp_rec(prog: Program, claim: RuleClaim, space=None, tol: float = 1e-9) -> Verdict:
    return check_rec(prog, [claim], space, tol)


def check_wlp_rec(prog: Program, claim: RuleClaim, space=None, tol: float = 1e-9) -> Verdict:
    return check_rec(prog, [claim], space, tol)


def check_ert_rec(prog: Program, claim: RuleClaim, space=None, tol: float = 1e-9,
                  cost: Optional[CostModel] = None) -> Verdict:
    return check_rec(prog, [claim], space, tol, cost)


def check_simultaneous(prog: Program, claims: Sequence[RuleClaim], space=None, tol: float = 1e-9,
                       cost: Optional[CostModel] = None) -> Verdict:
    return check_rec(prog, claims, space, tol, cost)


def check_omega(prog: Program, claim: RuleClaim, space: Optional[StateSpace] = None,
                tol: float = 1e-9, cost: Optional[CostModel] = None) -> Verdict:
    """Bounded check of an omega rule for steps n = 0 .. depth-1."""
    if not claim.omega:
        raise ElaborationError(f"{claim.rule} is not an omega rule")
    sp = _space_for(prog, space)
    cost = CostModel.parse(cost)
    mode = claim.mode
    proc = claim.proc
    prog.body(proc)
    post = _vec(claim.post, prog, sp)
    base = 1.0 if mode == "wlp" else 0.0
    top = 1.0 if mode == "wlp" else INF
    default_lo = "1" if mode == "wlp" else "0"
    default_up = "1" if mode == "wlp" else "[n > 0] * inf"
    lo_expr = claim.lower if claim.lower is not None else default_lo
    up_expr = claim.upper if claim.upper is not None else default_up

    def fam(expr, n):
        return _vec(expr, prog, sp, index=n)

    lo, up = fam(lo_expr, 0), fam(up_expr, 0)
    for side, vec in (("lower", lo), ("upper", up)):
        off = np.abs(vec - base) > tol
        if off.any():
            k = int(np.argmax(off))
            return Verdict("rejected", proc=proc, witness=sp.state(k), lhs=float(vec[k]), rhs=base,
                           side=side, step=0, reason="base case: both families must start at "
                           f"{'1' if mode == 'wlp' else '0'}")
    shift = cost.call if mode == "ert" else 0.0
    masked = False
    for n in range(claim.depth):
        nxt_lo, nxt_up = fam(lo_expr, n + 1), fam(up_expr, n + 1)
        table = _table(prog, mode, cost, tol)
        table.add(proc, post, lower=lo + shift, upper=up + shift)
        for side, bound in (("lower", nxt_lo), ("upper", nxt_up)):
            if side == "upper" and np.isinf(bound).all() or side == "lower" and (bound <= 0).all():
                continue  # trivial side
            if mode == "wlp" and side == "upper" and (bound >= 1).all():
                continue
            try:
                pre = _replay(prog, sp, proc, mode, post, table, side, cost)
            except _Unmatched as err:
                return _inconclusive(err, sp, proc, step=n)
            if np.isnan(pre).any():
                return Verdict("inconclusive", proc=proc, step=n,
                               reason="a runtime fault is reachable in the body")
            bad = _compare(pre, bound, side, tol)
            if bad is not None:
                return Verdict("rejected", proc=proc, witness=sp.state(bad), lhs=float(pre[bad]),
                               rhs=float(bound[bad]), side=side, step=n)
        masked = masked or table.masked
        lo, up = nxt_lo, nxt_up
    return Verdict("checked", proc=proc, depth=claim.depth, reason=_MASK_NOTE if masked else None)


def check_wp_rec_omega(prog, claim, space=None, tol=1e-9) -> Verdict:
    return check_omega(prog, claim, space, tol)


def check_wlp_rec_omega(prog, claim, space=None, tol=1e-9) -> Verdict:
    return check_omega(prog, claim, space, tol)


def check_ert_rec_omega(prog, claim, space=None, tol=1e-9, cost=None) -> Verdict:
    return check_omega(prog, claim, space, tol, cost)


def check(prog: Program, claims: Union[RuleClaim, Sequence[RuleClaim]], space=None,
          tol: float = 1e-9, cost=None) -> Verdict:
    """Dispatch on the rule; a list of single-step claims is checked simultaneously."""
    if isinstance(claims, RuleClaim):
        claims = [claims]
    claims = list(claims)
    if len(claims) == 1 and claims[0].omega:
        return check_omega(prog, claims[0], space, tol, cost)
    return check_rec(prog, claims, space, tol, cost)
