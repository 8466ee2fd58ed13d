"""wp, wlp and ert engines over enumerated state spaces.

Two representations are used side by side:

* a *kernel* ``(A, e)`` per command, where ``A`` is the sparse substochastic
  matrix with ``wp(c)(f) = A @ f`` and ``e`` is the probability of a runtime
  fault (array index out of bounds, assignment outside a domain);
* a vector-level structural interpreter that applies the transformer rules
  directly to a post-expectation, with procedure calls delegated to a
  handler.  Faulting states carry ``NaN``.

Recursion is resolved by Kleene iteration of procedure environments
starting from the everywhere-diverging environment.  Level ``n`` of that
iteration is exactly the ``n``-th inlining of every procedure.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Callable, Dict, Iterator, List, Mapping, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sps

from .errors import DomainViolation, ElaborationError
from .semantics import (
    INF, ONE_BOUNDED, RUNTIME, UNBOUNDED, Expectation, StateSpace,
    assignment_targets, eval_bool_vec, eval_int_vec, ext_mul,
)
from .syntax import (
    Abort, Assign, Call, Command, If, LabeledProgram, PChoice, Program, Seq, Skip,
    UniformAssign, While, called_procs, iter_commands,
)


# -- cost model ----------------------------------------------------------------

@dataclass(frozen=True)
class CostModel:
    """Ticks charged per construct by the runtime transformer."""
    skip: float = 1.0
    assign: float = 1.0
    guard: float = 1.0
    call: float = 1.0
    uniform: float = 1.0
    choice: float = 0.0

    PRESETS = ("default", "calls", "none")

    @classmethod
    def parse(cls, spec: Union[str, "CostModel", None]) -> "CostModel":
        """``default``, ``calls`` (count procedure calls only), ``none``, or
        comma separated overrides such as ``skip=0,assign=0``."""
        if spec is None or isinstance(spec, CostModel):
            return spec or cls()
        spec = spec.strip()
        if spec in ("", "default"):
            return cls()
        if spec == "calls":
            return cls(skip=0, assign=0, guard=0, call=1, uniform=0, choice=0)
        if spec == "none":
            return cls(0, 0, 0, 0, 0, 0)
        names = {f.name for f in fields(cls)}
        kwargs = {}
        for part in spec.split(","):
            key, _, val = part.partition("=")
            key = key.strip()
            if key not in names or not val:
                raise ValueError(f"bad cost model entry {part!r}")
            w = float(val)
            if w < 0:
                raise ValueError("tick weights must be non-negative")
            kwargs[key] = w
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


# -- kernels -------------------------------------------------------------------

def matvec(A, t: np.ndarray) -> np.ndarray:
    """``A @ t`` for non-negative sparse ``A`` with ``0 * inf = 0``."""
    t = np.asarray(t, dtype=float)
    hot = np.isinf(t)
    if not hot.any():
        return A @ t
    out = A @ np.where(hot, 0.0, t)
    reach = (A @ hot.astype(float)) > 0
    out[reach] = INF
    return out


@dataclass
class Kernel:
    """Linear summary of a command: ``wp(f) = A f``; ``e`` is the fault mass."""
    A: sps.csr_matrix
    e: np.ndarray

    @classmethod
    def zero(cls, n: int) -> "Kernel":
        return cls(sps.csr_matrix((n, n)), np.zeros(n))

    @classmethod
    def identity(cls, n: int) -> "Kernel":
        return cls(sps.identity(n, format="csr"), np.zeros(n))

    def mass(self) -> np.ndarray:
        """Termination probability without faults, i.e. ``wp(1)``."""
        return np.asarray(self.A.sum(axis=1)).ravel()

    def wp(self, f: np.ndarray) -> np.ndarray:
        return matvec(self.A, f)

    def wlp(self, f: np.ndarray) -> np.ndarray:
        # 1 - A(1 - f) - e equals A f + (1 - A 1 - e) but keeps wlp(1) exactly 1
        f = np.asarray(f, dtype=float)
        return np.clip(1.0 - self.A @ (1.0 - f) - self.e, 0.0, 1.0)


# The environment types: wp/wlp environments are kernels, runtime
# environments add an offset vector (eta(t) = r + A t).
ProcEnv = Kernel


@dataclass
class RuntimeEnv:
    offset: np.ndarray
    kernel: Kernel

    def __call__(self, t: np.ndarray) -> np.ndarray:
        return self.offset + matvec(self.kernel.A, t)


def _csr(rows, cols, data, n) -> sps.csr_matrix:
    A = sps.csr_matrix((data, (rows, cols)), shape=(n, n))
    A.sum_duplicates()
    A.eliminate_zeros()
    return A


def _row_scale(mask_or_weights: np.ndarray, A) -> sps.csr_matrix:
    return sps.diags(np.asarray(mask_or_weights, dtype=float)) @ A


def build_kernel(c: Command, sp: StateSpace, env: Mapping[str, Kernel],
                 cache: Optional[dict] = None) -> Kernel:
    """Kernel of ``c`` with calls resolved through ``env``.

    ``cache`` memoizes call-free subcommands across repeated builds.
    """
    n = sp.size
    if cache is not None and id(c) in cache:
        return cache[id(c)][1]

    def memo(k: Kernel) -> Kernel:
        if cache is not None and not called_procs(c):
            cache[id(c)] = (c, k)
        return k

    if isinstance(c, Skip):
        return Kernel.identity(n)
    if isinstance(c, Abort):
        return Kernel.zero(n)
    if isinstance(c, Call):
        if c.proc not in env:
            raise ElaborationError(f"no environment entry for procedure {c.proc!r}")
        return env[c.proc]
    if isinstance(c, Assign):
        target, fault, _ = assignment_targets(sp, c.var, c.expr)
        ok = ~fault
        rows = np.nonzero(ok)[0]
        return memo(Kernel(_csr(rows, target[ok], np.ones(len(rows)), n), fault.astype(float)))
    if isinstance(c, UniformAssign):
        return memo(_uniform_kernel(c, sp))
    if isinstance(c, If):
        g, gf = eval_bool_vec(c.guard, sp)
        k1 = build_kernel(c.then, sp, env, cache)
        k2 = build_kernel(c.orelse, sp, env, cache)
        yes, no = g & ~gf, ~g & ~gf
        A = _row_scale(yes, k1.A) + _row_scale(no, k2.A)
        A.eliminate_zeros()
        e = np.where(gf, 1.0, np.where(g, k1.e, k2.e))
        return memo(Kernel(A.tocsr(), e))
    if isinstance(c, PChoice):
        p = float(c.prob)
        if p == 1.0:
            return memo(build_kernel(c.left, sp, env, cache))
        if p == 0.0:
            return memo(build_kernel(c.right, sp, env, cache))
        k1 = build_kernel(c.left, sp, env, cache)
        k2 = build_kernel(c.right, sp, env, cache)
        return memo(Kernel((p * k1.A + (1 - p) * k2.A).tocsr(), p * k1.e + (1 - p) * k2.e))
    if isinstance(c, Seq):
        k1 = build_kernel(c.first, sp, env, cache)
        k2 = build_kernel(c.second, sp, env, cache)
        A = (k1.A @ k2.A).tocsr()
        A.eliminate_zeros()
        return memo(Kernel(A, k1.e + k1.A @ k2.e))
    if isinstance(c, While):
        raise ElaborationError("desugar while loops before analysis")
    raise TypeError(f"not a command: {c!r}")


def _uniform_kernel(c: UniformAssign, sp: StateSpace) -> Kernel:
    n = sp.size
    lo, flo = eval_int_vec(c.lo, sp)
    hi, fhi = eval_int_vec(c.hi, sp)
    fault = flo | fhi
    live = ~fault & (lo <= hi)
    e = fault.astype(float)
    decl = sp.decl(c.var)
    stride = sp.strides[sp.names.index(c.var)]
    cur = sp.column(c.var)
    idx = np.arange(n, dtype=np.int64)
    width = np.where(live, hi - lo + 1, 1).astype(float)
    rows, cols, data = [], [], []
    if live.any():
        for v in range(int(lo[live].min()), int(hi[live].max()) + 1):
            sel = live & (lo <= v) & (v <= hi)
            if not sel.any():
                continue
            if decl.lo <= v <= decl.hi:
                r = np.nonzero(sel)[0]
                rows.append(r)
                cols.append(idx[r] + (v - cur[r]) * stride)
                data.append(1.0 / width[r])
            else:
                e[sel] += 1.0 / width[sel]
    if rows:
        A = _csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(data), n)
    else:
        A = sps.csr_matrix((n, n))
    return Kernel(A, e)


def wp_matrix(c: Command, sp: StateSpace, env: Optional[Mapping[str, Kernel]] = None) -> sps.csr_matrix:
    """Matrix ``A`` with ``A @ f = wp(c)(f)`` for every ``f``."""
    return build_kernel(c, sp, env or {}).A


# -- structural vector interpreter ---------------------------------------------

CallHandler = Callable[[str, np.ndarray], np.ndarray]


def transform_vec(c: Command, sp: StateSpace, mode: str, post: np.ndarray,
                  call: CallHandler, cost: Optional[CostModel] = None) -> np.ndarray:
    """Apply the ``mode`` transformer (wp, wlp or ert) of ``c`` to ``post``.

    Calls are resolved by ``call(proc, vector)``.  States at which ``c`` can
    fault get ``NaN``.
    """
    cost = cost or CostModel()
    n = sp.size
    rt = mode == "ert"

    def go(c: Command, f: np.ndarray) -> np.ndarray:
        if isinstance(c, Seq):
            return go(c.first, go(c.second, f))
        if isinstance(c, Skip):
            return f + cost.skip if rt else f
        if isinstance(c, Abort):
            return np.full(n, 1.0 if mode == "wlp" else 0.0)
        if isinstance(c, Call):
            return np.asarray(call(c.proc, f), dtype=float)
        if isinstance(c, Assign):
            target, fault, _ = assignment_targets(sp, c.var, c.expr)
            out = np.where(fault, np.nan, f[target])
            return out + cost.assign if rt else out
        if isinstance(c, UniformAssign):
            return uniform_vec(c, f)
        if isinstance(c, If):
            g, gf = eval_bool_vec(c.guard, sp)
            out = np.where(gf, np.nan, np.where(g, go(c.then, f), go(c.orelse, f)))
            return out + cost.guard if rt else out
        if isinstance(c, PChoice):
            p = float(c.prob)
            if p == 1.0:
                out = go(c.left, f)
            elif p == 0.0:
                out = go(c.right, f)
            else:
                out = ext_mul(p, go(c.left, f)) + ext_mul(1 - p, go(c.right, f))
            return out + cost.choice if rt and cost.choice else out
        if isinstance(c, While):
            raise ElaborationError("desugar while loops before analysis")
        raise TypeError(f"not a command: {c!r}")

    def uniform_vec(c: UniformAssign, f: np.ndarray) -> np.ndarray:
        lo, flo = eval_int_vec(c.lo, sp)
        hi, fhi = eval_int_vec(c.hi, sp)
        fault = flo | fhi
        live = ~fault & (lo <= hi)
        decl = sp.decl(c.var)
        stride = sp.strides[sp.names.index(c.var)]
        cur = sp.column(c.var)
        idx = np.arange(n, dtype=np.int64)
        acc = np.zeros(n)
        if live.any():
            for v in range(int(lo[live].min()), int(hi[live].max()) + 1):
                sel = live & (lo <= v) & (v <= hi)
                if not sel.any():
                    continue
                if decl.lo <= v <= decl.hi:
                    tgt = np.where(sel, idx + (v - cur) * stride, 0)
                    acc = acc + np.where(sel, f[np.clip(tgt, 0, n - 1)], 0.0)
                else:
                    acc = np.where(sel, np.nan, acc)
        mean = acc / np.where(live, hi - lo + 1, 1)
        empty = {"wp": 0.0, "wlp": 1.0, "ert": INF}[mode]
        out = np.where(live, mean + (cost.uniform if rt else 0.0), empty)
        return np.where(fault, np.nan, out)

    return go(c, np.asarray(post, dtype=float))


def _handler(env: Mapping, mode: str) -> CallHandler:
    def call(proc: str, vec: np.ndarray) -> np.ndarray:
        if proc not in env:
            raise ElaborationError(f"no environment entry for procedure {proc!r}")
        entry = env[proc]
        if callable(entry) and not isinstance(entry, Kernel):
            return entry(vec)
        if isinstance(entry, Kernel):
            return entry.wlp(vec) if mode == "wlp" else entry.wp(vec)
        if isinstance(entry, (np.ndarray, sps.spmatrix)):
            return matvec(sps.csr_matrix(entry), vec)
        raise TypeError(f"unsupported environment entry for {proc!r}")
    return call


def _finish(sp: StateSpace, vec: np.ndarray, tag: str) -> Expectation:
    bad = np.isnan(vec)
    if bad.any():
        k = int(np.argmax(bad))
        raise DomainViolation(f"runtime fault reachable from state {sp.state(k)}", sp.state(k))
    if tag == ONE_BOUNDED:
        vec = np.minimum(vec, 1.0)
    return Expectation(sp, vec, tag)


def ewp(c: Command, env: Mapping, f: Expectation) -> Expectation:
    return _finish(f.space, transform_vec(c, f.space, "wp", f.values, _handler(env, "wp")), UNBOUNDED)


def ewlp(c: Command, env: Mapping, f: Expectation) -> Expectation:
    if (f.values > 1 + 1e-12).any():
        raise ValueError("wlp needs a one-bounded post-expectation")
    return _finish(f.space, transform_vec(c, f.space, "wlp", f.values, _handler(env, "wlp")), ONE_BOUNDED)


def eert(c: Command, env: Mapping, t: Expectation, cost: Optional[CostModel] = None) -> Expectation:
    return _finish(t.space, transform_vec(c, t.space, "ert", t.values, _handler(env, "ert"), cost), RUNTIME)


# -- Kleene iteration ----------------------------------------------------------

@dataclass
class Level:
    """Environments after ``n`` rounds: every call unfolded at most ``n`` deep."""
    n: int
    kernels: Dict[str, Kernel]
    offsets: Optional[Dict[str, np.ndarray]] = None

    def runtime_env(self) -> Dict[str, RuntimeEnv]:
        return {p: RuntimeEnv(self.offsets[p], k) for p, k in self.kernels.items()}


def _as_program(prog) -> Program:
    return prog.program if isinstance(prog, LabeledProgram) else prog


def iterate_environments(prog, sp: StateSpace, runtime: bool = False,
                         cost: Optional[CostModel] = None) -> Iterator[Level]:
    """Yield level 0, 1, 2, ... of the procedure environments.

    With ``runtime`` the ert offsets ``eta_n(P)(0)`` are tracked as well; the
    call tick is folded into each procedure's entry.
    """
    prog = _as_program(prog)
    cost = CostModel.parse(cost)
    n = sp.size
    cache: dict = {}
    kernels = {p: Kernel.zero(n) for p, _ in prog.decls}
    offsets = {p: np.zeros(n) for p, _ in prog.decls} if runtime else None
    level = 0
    while True:
        yield Level(level, kernels, offsets)
        new_k = {p: build_kernel(body, sp, kernels, cache) for p, body in prog.decls}
        if runtime:
            env = {p: RuntimeEnv(offsets[p], kernels[p]) for p in kernels}
            zero = np.zeros(n)
            offsets = {p: cost.call + transform_vec(body, sp, "ert", zero, _handler(env, "ert"), cost)
                       for p, body in prog.decls}
        kernels = new_k
        level += 1


def level_environment(prog, sp: StateSpace, n: int, runtime: bool = False,
                      cost: Optional[CostModel] = None) -> Level:
    for lv in iterate_environments(prog, sp, runtime, cost):
        if lv.n == n:
            return lv


@dataclass
class FixpointReport:
    iterations: int
    delta_last: float
    converged: bool
    direction: str  # "lower" or "upper"

    def to_json(self) -> dict:
        d = float(self.delta_last)
        return {"iterations": self.iterations, "delta_last": "inf" if np.isinf(d) else d,
                "converged": self.converged, "direction": self.direction}


def _delta(a: np.ndarray, b: np.ndarray) -> float:
    both = np.isinf(a) & np.isinf(b)
    with np.errstate(invalid="ignore"):
        d = np.where(both, 0.0, np.abs(a - b))
    d = np.where(np.isnan(d), 0.0, d)
    return float(d.max(initial=0.0))


MONOTONE_SLACK = 1e-9


def solve_environment(prog, sp: StateSpace, probe: Optional[np.ndarray] = None,
                      runtime: bool = False, max_iters: int = 100000, tol: float = 1e-9,
                      cost: Optional[CostModel] = None) -> Tuple[Level, FixpointReport]:
    """Iterate environments until every procedure's action on ``probe`` and
    on the constant one (and, for runtimes, its offset) moves by less than
    ``tol``.  Each chain is checked to be non-decreasing."""
    prog = _as_program(prog)
    ones = np.ones(sp.size)
    probes = [ones] if probe is None else [ones, np.asarray(probe, dtype=float)]
    prev = None
    delta = INF
    last = None
    for lv in iterate_environments(prog, sp, runtime, cost):
        snap = []
        for p, k in lv.kernels.items():
            snap.extend(k.wp(v) for v in probes)
            if runtime:
                snap.append(lv.offsets[p])
        if prev is not None:
            delta = max((_delta(a, b) for a, b in zip(snap, prev)), default=0.0)
            for a, b in zip(snap, prev):
                with np.errstate(invalid="ignore"):
                    if np.any(a < b - MONOTONE_SLACK):
                        raise RuntimeError("environment iterates are not monotone")
            if delta < tol:
                return lv, FixpointReport(lv.n, delta, True, "lower")
        prev = snap
        last = lv
        if lv.n >= max_iters:
            break
    return last, FixpointReport(last.n, delta, False, "lower")


def _main_kernel(prog: Program, sp: StateSpace, lv: Level) -> Kernel:
    return build_kernel(prog.main, sp, lv.kernels)


def _raise_on_fault(sp: StateSpace, e: np.ndarray):
    if (e > 0).any():
        k = int(np.argmax(e > 0))
        raise DomainViolation(f"runtime fault reachable from state {sp.state(k)} "
                              f"with probability {e[k]:.6g}", sp.state(k))


def wp(prog, f: Expectation, max_iters: int = 100000, tol: float = 1e-9) -> Tuple[Expectation, FixpointReport]:
    """Least-fixpoint wp of ``main``; the result is a lower bound of the exact value."""
    prog = _as_program(prog)
    sp = f.space
    lv, rep = solve_environment(prog, sp, f.values, max_iters=max_iters, tol=tol)
    k = _main_kernel(prog, sp, lv)
    _raise_on_fault(sp, k.e)
    return Expectation(sp, k.wp(f.values), UNBOUNDED), rep


def wlp(prog, f: Expectation, max_iters: int = 100000, tol: float = 1e-9) -> Tuple[Expectation, FixpointReport]:
    """Greatest-fixpoint wlp of ``main``; the result is an upper bound."""
    prog = _as_program(prog)
    sp = f.space
    if (f.values > 1 + 1e-12).any():
        raise ValueError("wlp needs a one-bounded post-expectation")
    lv, rep = solve_environment(prog, sp, f.values, max_iters=max_iters, tol=tol)
    k = _main_kernel(prog, sp, lv)
    _raise_on_fault(sp, k.e)
    vals = np.minimum(k.wlp(f.values), 1.0)
    return Expectation(sp, vals, ONE_BOUNDED), replace(rep, direction="upper")


def ert(prog, t: Expectation, max_iters: int = 100000, tol: float = 1e-9,
        cost: Optional[CostModel] = None) -> Tuple[Expectation, FixpointReport]:
    """Least-fixpoint expected runtime of ``main``; a lower bound of the exact value."""
    prog = _as_program(prog)
    sp = t.space
    cost = CostModel.parse(cost)
    lv, rep = solve_environment(prog, sp, t.values, runtime=True, max_iters=max_iters, tol=tol, cost=cost)
    k = _main_kernel(prog, sp, lv)
    _raise_on_fault(sp, k.e)
    vals = transform_vec(prog.main, sp, "ert", t.values, _handler(lv.runtime_env(), "ert"), cost)
    return _finish(sp, vals, RUNTIME), rep


def decompose_check(prog, t: Expectation, n: int = 50,
                    cost: Optional[CostModel] = None) -> Tuple[Expectation, Expectation, float]:
    """Compare ``ert(t)`` with ``ert(0) + wp(t)`` at level ``n`` of both iterations.

    The ert side runs the structural runtime interpreter; the wp side uses
    an independent wp-only iteration.
    """
    prog = _as_program(prog)
    sp = t.space
    rt = level_environment(prog, sp, n, runtime=True, cost=cost)
    wl = level_environment(prog, sp, n)
    handler = _handler(rt.runtime_env(), "ert")
    lhs = transform_vec(prog.main, sp, "ert", t.values, handler, cost)
    base = transform_vec(prog.main, sp, "ert", np.zeros(sp.size), handler, cost)
    wpt = transform_vec(prog.main, sp, "wp", t.values, _handler(wl.kernels, "wp"))
    rhs = base + wpt
    lhs_e, rhs_e = _finish(sp, lhs, RUNTIME), _finish(sp, rhs, RUNTIME)
    return lhs_e, rhs_e, _delta(lhs, rhs)


def result_json(query: str, post: str, value: Expectation, report: FixpointReport) -> dict:
    """The serialized form shared by the CLI and the estimators."""
    vals = {}
    for i in range(value.space.size):
        key = ",".join(f"{k}={v}" for k, v in value.space.state(i).items()) or "*"
        x = float(value.values[i])
        vals[key] = "inf" if np.isinf(x) else x
    return {"query": query, "post": post, "iterations": report.iterations,
            "converged": report.converged, "direction": report.direction, "values": vals}
