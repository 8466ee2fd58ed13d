"""Operational semantics: a pushdown Markov chain with rewards.

Configurations are ``(label, state, stack)`` where ``stack`` lists the
return labels above the bottom symbol.  ``step`` gives the exact
(rational) transitions.  The solvers enumerate every configuration
reachable under a stack bound and solve the resulting finite Markov
chain; ``simulate`` samples trajectories of the unbounded chain.
"""
from __future__ import annotations

import os
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sps
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.sparse.linalg import spsolve

from .errors import ConfigLimitExceeded, DomainViolation
from .semantics import INF, Expectation, StateSpace, assignment_targets, eval_bool_vec, eval_int_vec
from .syntax import (
    DOWN, TERM, Abort, Assign, Call, If, LabeledProgram, PChoice, Program, Skip,
    UniformAssign, label_program,
)
from .transformers import CostModel, _handler, level_environment, transform_vec

BOTTOM = "γ₀"
FAULT = "fault"
DEFAULT_MAX_CONFIGS = 2_000_000


class Config(NamedTuple):
    label: object  # int label, DOWN or TERM
    state: int
    stack: Tuple = ()  # return labels above the bottom symbol, top last


@dataclass(frozen=True)
class Transition:
    prob: Fraction
    pop: object
    push: Tuple
    target: Config


def _labeled(prog) -> LabeledProgram:
    return prog if isinstance(prog, LabeledProgram) else label_program(prog)


def _max_configs() -> int:
    raw = os.environ.get("PREXPECT_MAX_CONFIGS")
    return int(raw) if raw else DEFAULT_MAX_CONFIGS


class _Tables:
    """Per-label successor lists over all states, computed once."""

    def __init__(self, lp: LabeledProgram, sp: StateSpace, cost: CostModel):
        self.lp, self.sp, self.cost = lp, sp, cost
        self._cache: Dict[int, List] = {}

    def moves(self, label: int) -> List[List[Tuple[Fraction, object, int]]]:
        """For each state: list of (prob, next label, next state); FAULT marks a fault."""
        if label in self._cache:
            return self._cache[label]
        lp, sp = self.lp, self.sp
        c = lp.stmt[label]
        n = sp.size
        s1 = lp.succ1[label]
        out: List[List] = []
        if isinstance(c, Skip):
            out = [[(Fraction(1), s1, i)] for i in range(n)]
        elif isinstance(c, Abort):
            out = [[(Fraction(1), label, i)] for i in range(n)]
        elif isinstance(c, Assign):
            target, fault, _ = assignment_targets(sp, c.var, c.expr)
            out = [[(Fraction(1), FAULT, i)] if fault[i] else [(Fraction(1), s1, int(target[i]))]
                   for i in range(n)]
        elif isinstance(c, If):
            g, gf = eval_bool_vec(c.guard, sp)
            s2 = lp.succ2[label]
            out = [[(Fraction(1), FAULT, i)] if gf[i] else [(Fraction(1), s1 if g[i] else s2, i)]
                   for i in range(n)]
        elif isinstance(c, PChoice):
            s2 = lp.succ2[label]
            p = c.prob
            out = [[m for m in ((p, s1, i), (1 - p, s2, i)) if m[0] > 0] for i in range(n)]
        elif isinstance(c, UniformAssign):
            lo, flo = eval_int_vec(c.lo, sp)
            hi, fhi = eval_int_vec(c.hi, sp)
            decl = sp.decl(c.var)
            stride = sp.strides[sp.names.index(c.var)]
            cur = sp.column(c.var)
            for i in range(n):
                if flo[i] or fhi[i]:
                    out.append([(Fraction(1), FAULT, i)])
                elif lo[i] > hi[i]:
                    out.append([(Fraction(1), label, i)])
                else:
                    w = Fraction(1, int(hi[i] - lo[i] + 1))
                    row = []
                    for v in range(int(lo[i]), int(hi[i]) + 1):
                        if decl.lo <= v <= decl.hi:
                            row.append((w, s1, i + (v - int(cur[i])) * stride))
                        else:
                            row.append((w, FAULT, i))
                    out.append(row)
        else:
            raise TypeError(f"label {label} has no local moves")
        self._cache[label] = out
        return out

    def tick(self, label) -> float:
        """Reward charged when leaving a configuration at ``label``."""
        if not isinstance(label, int):
            return 0.0
        c = self.lp.stmt[label]
        cm = self.cost
        if isinstance(c, Skip):
            return cm.skip
        if isinstance(c, Assign):
            return cm.assign
        if isinstance(c, If):
            return cm.guard
        if isinstance(c, Call):
            return cm.call
        if isinstance(c, UniformAssign):
            return cm.uniform
        if isinstance(c, PChoice):
            return cm.choice
        return 0.0


def initial_config(lp: LabeledProgram, state: int) -> Config:
    return Config(lp.main_init, state, ())


def step(cfg: Config, prog, sp: StateSpace, stack_bound: Optional[int] = None) -> List[Transition]:
    """Exact transitions out of ``cfg``.  Calls beyond ``stack_bound`` self-loop."""
    lp = _labeled(prog)
    label, s, stack = cfg
    top = stack[-1] if stack else BOTTOM
    if label == TERM:
        return [Transition(Fraction(1), BOTTOM, (BOTTOM,), cfg)]
    if label == DOWN:
        if stack:
            return [Transition(Fraction(1), top, (), Config(top, s, stack[:-1]))]
        return [Transition(Fraction(1), BOTTOM, (BOTTOM,), Config(TERM, s, ()))]
    c = lp.stmt[label]
    if isinstance(c, Call):
        if stack_bound is not None and len(stack) >= stack_bound:
            return [Transition(Fraction(1), top, (top,), cfg)]
        ret = lp.succ1[label]
        return [Transition(Fraction(1), top, (top, ret),
                           Config(lp.proc_init[c.proc], s, stack + (ret,)))]
    tables = _Tables(lp, sp, CostModel())
    out = []
    for p, nxt, j in tables.moves(label)[s]:
        if nxt == FAULT:
            raise DomainViolation(f"runtime fault at label {label}, state {sp.state(s)}", sp.state(s))
        out.append(Transition(p, top, (top,), Config(nxt, j, stack)))
    return out


# -- enumeration ---------------------------------------------------------------

@dataclass
class Chain:
    """A finite chain over the configurations reachable under a stack bound."""
    configs: List[Config]
    P: sps.csr_matrix           # transitions between configurations
    term_reward_from: sps.csr_matrix  # [config, state] mass moved into (Term, state)
    fault: np.ndarray           # probability of faulting in one step
    tick: np.ndarray            # reward for leaving each configuration
    truncating: np.ndarray      # configuration is a stack-bound self-loop
    diverging: np.ndarray       # empty-range uniform self-loop
    init: np.ndarray            # index of the initial configuration per state


def enumerate_chain(prog, sp: StateSpace, stack_bound: Optional[int],
                    initial_states: Optional[Sequence[int]] = None,
                    cost: Optional[CostModel] = None, max_configs: Optional[int] = None) -> Chain:
    """Breadth-first enumeration from the initial configuration of every
    state in ``initial_states`` (default: all states)."""
    lp = _labeled(prog)
    tables = _Tables(lp, sp, CostModel.parse(cost))
    cap = max_configs or _max_configs()
    starts = list(range(sp.size)) if initial_states is None else list(initial_states)
    index: Dict[Config, int] = {}
    configs: List[Config] = []
    rows, cols, vals = [], [], []
    t_rows, t_cols, t_vals = [], [], []
    fault: List[float] = []
    trunc: List[bool] = []
    div: List[bool] = []
    queue: deque = deque()

    def intern(cfg: Config) -> int:
        k = index.get(cfg)
        if k is None:
            k = len(configs)
            if k >= cap:
                raise ConfigLimitExceeded(
                    f"more than {cap} configurations (raise PREXPECT_MAX_CONFIGS or lower the stack bound)")
            index[cfg] = k
            configs.append(cfg)
            fault.append(0.0)
            trunc.append(False)
            div.append(False)
            queue.append(k)
        return k

    init = np.array([intern(initial_config(lp, s)) for s in starts], dtype=np.int64)
    while queue:
        k = queue.popleft()
        label, s, stack = configs[k]
        if label == DOWN:
            if stack:
                j = intern(Config(stack[-1], s, stack[:-1]))
                rows.append(k); cols.append(j); vals.append(1.0)
            else:
                t_rows.append(k); t_cols.append(s); t_vals.append(1.0)
            continue
        c = lp.stmt[label]
        if isinstance(c, Call):
            if stack_bound is not None and len(stack) >= stack_bound:
                trunc[k] = True
                rows.append(k); cols.append(k); vals.append(1.0)
            else:
                ret = lp.succ1[label]
                j = intern(Config(lp.proc_init[c.proc], s, stack + (ret,)))
                rows.append(k); cols.append(j); vals.append(1.0)
            continue
        for p, nxt, j_state in tables.moves(label)[s]:
            p = float(p)
            if nxt == FAULT:
                fault[k] += p
                continue
            if nxt == label and j_state == s and isinstance(c, UniformAssign):
                div[k] = True
            if nxt == TERM:
                t_rows.append(k); t_cols.append(j_state); t_vals.append(p)
                continue
            j = intern(Config(nxt, j_state, stack))
            rows.append(k); cols.append(j); vals.append(p)
    m = len(configs)
    P = sps.csr_matrix((vals, (rows, cols)), shape=(m, m))
    T = sps.csr_matrix((t_vals, (t_rows, t_cols)), shape=(m, sp.size))
    ticks = np.array([tables.tick(cfg.label) for cfg in configs])
    return Chain(configs, P, T, np.array(fault), ticks, np.array(trunc, bool), np.array(div, bool), init)


def _can_reach(G: sps.csr_matrix, sources: np.ndarray) -> np.ndarray:
    """Nodes from which some node in ``sources`` is graph-reachable."""
    m = G.shape[0]
    hit = np.zeros(m, bool)
    if not sources.any():
        return hit
    # add a virtual sink fed by every source and search backwards from it
    R = sps.bmat([[G, sps.csr_matrix(sources.reshape(-1, 1).astype(float))],
                  [sps.csr_matrix((1, m)), None]], format="csr")
    order = breadth_first_order(R.T.tocsr(), m, directed=True, return_predecessors=False)
    hit[order[order < m]] = True
    return hit


def _solve(A_sub: sps.csr_matrix, b: np.ndarray, verify: bool = True) -> np.ndarray:
    """Solve ``x = A x + b`` (A substochastic, I - A nonsingular)."""
    m = A_sub.shape[0]
    if m == 0:
        return np.zeros(0)
    x = np.atleast_1d(spsolve((sps.identity(m, format="csc") - A_sub.tocsc()), b))
    if verify and m <= 20000:
        y = np.zeros(m)
        for _ in range(100000):
            nxt = A_sub @ y + b
            if np.max(np.abs(nxt - y), initial=0.0) < 1e-12:
                y = nxt
                break
            y = nxt
        else:
            return x
        if np.max(np.abs(x - y), initial=0.0) > 1e-9:
            raise RuntimeError("linear solve and value iteration disagree")
    return x


def reward_values(chain: Chain, f: np.ndarray, verify: bool = True) -> np.ndarray:
    """Expected reward of reaching Term, per configuration; NaN where a fault is reachable."""
    m = len(chain.configs)
    f = np.asarray(f, dtype=float)
    G = chain.P.copy()
    G.data[:] = 1.0
    fault_reach = _can_reach(G, chain.fault > 0)
    into_term = np.asarray((chain.term_reward_from > 0).sum(axis=1)).ravel() > 0
    live = _can_reach(G, into_term)
    hot = np.isinf(f)
    inf_src = np.asarray((chain.term_reward_from[:, hot] > 0).sum(axis=1)).ravel() > 0 if hot.any() else np.zeros(m, bool)
    inf_reach = _can_reach(G, inf_src)
    solve = live & ~inf_reach
    idx = np.nonzero(solve)[0]
    b = chain.term_reward_from @ np.where(hot, 0.0, f)
    x = np.zeros(m)
    x[idx] = _solve(chain.P[idx][:, idx], b[idx], verify)
    x[inf_reach] = INF
    x[fault_reach] = np.nan
    return x


def runtime_values(chain: Chain) -> np.ndarray:
    """Expected accumulated ticks per configuration (ticks over infinite runs included)."""
    m = len(chain.configs)
    P = chain.P.tolil()
    r = chain.tick.copy()
    # an empty-range uniform diverges; give its self-loop a positive reward
    r[chain.diverging] = np.maximum(r[chain.diverging], 1.0)
    # truncated calls and abort loops cost nothing
    r[chain.truncating] = 0.0
    P = P.tocsr()
    G = P.copy()
    G.data[:] = 1.0
    ncomp, comp = connected_components(G, directed=True, connection="strong")
    # bottom components: no edge leaving the component
    leaves = np.ones(ncomp, bool)
    coo = G.tocoo()
    cross = comp[coo.row] != comp[coo.col]
    leaves[np.unique(comp[coo.row[cross]])] = False
    # mass leaving to Term or a fault also leaves the component
    exits = (np.asarray(chain.term_reward_from.sum(axis=1)).ravel() > 0) | (chain.fault > 0)
    leaves[np.unique(comp[exits])] = False
    in_leaf = leaves[comp]
    paying_leaf = np.zeros(ncomp, bool)
    paying_leaf[np.unique(comp[in_leaf & (r > 0)])] = True
    bad = _can_reach(G, paying_leaf[comp])
    trans = ~in_leaf & ~bad
    idx = np.nonzero(trans)[0]
    x = np.zeros(m)
    x[idx] = _solve(P[idx][:, idx], r[idx])
    x[bad] = INF
    fault_reach = _can_reach(G, chain.fault > 0)
    x[fault_reach] = np.nan
    return x


def _state_index(sp: StateSpace, sigma0) -> int:
    if isinstance(sigma0, (int, np.integer)):
        return int(sigma0)
    return sp.index_of(sigma0)


@dataclass
class BoundedResult:
    value: float
    truncated: bool
    configs: int

    def to_json(self) -> dict:
        v = self.value
        return {"value": "inf" if np.isinf(v) else float(v), "truncated": bool(self.truncated),
                "configs": int(self.configs)}


def expected_rewards_all(prog, f: Expectation, stack_bound: Optional[int],
                         max_configs: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray, int]:
    """Bounded expected rewards for every initial state at once.

    Returns (values, truncated flags, number of configurations); values are
    NaN where a runtime fault is reachable.
    """
    sp = f.space
    chain = enumerate_chain(prog, sp, stack_bound, max_configs=max_configs)
    x = reward_values(chain, f.values)
    G = chain.P.copy()
    G.data[:] = 1.0
    tr = _can_reach(G, chain.truncating)
    return x[chain.init], tr[chain.init], len(chain.configs)


def expected_reward_bounded(prog, sigma0, f: Expectation, stack_bound: Optional[int],
                            max_configs: Optional[int] = None) -> BoundedResult:
    """Expected reward ``f`` on termination from ``sigma0`` with at most
    ``stack_bound`` return labels on the stack."""
    sp = f.space
    s = _state_index(sp, sigma0)
    chain = enumerate_chain(prog, sp, stack_bound, [s], max_configs=max_configs)
    x = reward_values(chain, f.values)
    v = x[chain.init[0]]
    if np.isnan(v):
        raise DomainViolation(f"runtime fault reachable from {sp.state(s)}", sp.state(s))
    G = chain.P.copy()
    G.data[:] = 1.0
    tr = _can_reach(G, chain.truncating)[chain.init[0]]
    return BoundedResult(float(v), bool(tr), len(chain.configs))


def expected_runtime_bounded(prog, sigma0, sp: StateSpace, stack_bound: Optional[int],
                             cost: Optional[CostModel] = None,
                             max_configs: Optional[int] = None) -> BoundedResult:
    """Expected number of ticks from ``sigma0`` with calls truncated at ``stack_bound``."""
    s = _state_index(sp, sigma0)
    chain = enumerate_chain(prog, sp, stack_bound, [s], cost=cost, max_configs=max_configs)
    x = runtime_values(chain)
    v = x[chain.init[0]]
    if np.isnan(v):
        raise DomainViolation(f"runtime fault reachable from {sp.state(s)}", sp.state(s))
    G = chain.P.copy()
    G.data[:] = 1.0
    tr = _can_reach(G, chain.truncating)[chain.init[0]]
    return BoundedResult(float(v), bool(tr), len(chain.configs))


def correspondence_gaps(prog, f: Expectation, n: int) -> np.ndarray:
    """Per initial state: |bounded-stack expected reward - wp under the level-n environment|.

    NaN marks states from which a fault is reachable.
    """
    program = prog.program if isinstance(prog, LabeledProgram) else prog
    sp = f.space
    ops, _, _ = expected_rewards_all(program, f, n)
    lv = level_environment(program, sp, n)
    den = transform_vec(program.main, sp, "wp", f.values, _handler(lv.kernels, "wp"))
    both_inf = np.isinf(ops) & np.isinf(den)
    with np.errstate(invalid="ignore"):
        return np.where(both_inf, 0.0, np.abs(ops - den))


def correspondence_check(prog, sigma0, f: Expectation, n: int) -> float:
    sp = f.space
    program = prog.program if isinstance(prog, LabeledProgram) else prog
    s = _state_index(sp, sigma0)
    ops = expected_reward_bounded(program, s, f, n).value
    lv = level_environment(program, sp, n)
    den = transform_vec(program.main, sp, "wp", f.values, _handler(lv.kernels, "wp"))[s]
    if np.isnan(den):
        raise DomainViolation(f"runtime fault reachable from {sp.state(s)}", sp.state(s))
    if np.isinf(ops) and np.isinf(den):
        return 0.0
    return abs(ops - den)


# -- simulation ----------------------------------------------------------------

_KIND_MOVE, _KIND_CALL, _KIND_DOWN, _KIND_TERM = 0, 1, 2, 3


def _compile(lp: LabeledProgram, sp: StateSpace, cost: CostModel):
    """Flatten the chain into arrays indexed by (label slot, state)."""
    labels = lp.labels
    slot = {l: i for i, l in enumerate(labels)}
    down, term = len(labels), len(labels) + 1
    slot[DOWN], slot[TERM] = down, term
    nl, ns = len(labels) + 2, sp.size
    tables = _Tables(lp, sp, cost)
    kind = np.zeros(nl, np.int64)
    call_target = np.full(nl, -1, np.int64)
    call_ret = np.full(nl, -1, np.int64)
    tick = np.zeros(nl)
    start = np.zeros((nl, ns), np.int64)
    count = np.zeros((nl, ns), np.int64)
    cum, nxt_l, nxt_s = [], [], []
    for l in labels:
        i = slot[l]
        c = lp.stmt[l]
        tick[i] = tables.tick(l)
        if isinstance(c, Call):
            kind[i] = _KIND_CALL
            call_target[i] = slot[lp.proc_init[c.proc]]
            call_ret[i] = slot[lp.succ1[l]]
            continue
        kind[i] = _KIND_MOVE
        moves = tables.moves(l)
        for s in range(ns):
            start[i, s] = len(cum)
            acc = 0.0
            row = moves[s]
            for p, nl_, ns_ in row:
                acc += float(p)
                cum.append(acc)
                nxt_l.append(-1 if nl_ == FAULT else slot[nl_])
                nxt_s.append(ns_)
            count[i, s] = len(row)
            if len(row) == 1 and row[0][1] == l and row[0][2] == s:
                count[i, s] = 0  # certain self-loop: the run is stuck forever
    kind[down] = _KIND_DOWN
    kind[term] = _KIND_TERM
    return (slot, kind, call_target, call_ret, tick, start, count,
            np.array(cum, float), np.array(nxt_l, np.int64), np.array(nxt_s, np.int64))


def _simulate_py(init_label, init_state, seeds, max_steps, kind, call_target, call_ret,
                 tick, start, count, cum, nxt_l, nxt_s, term_slot):
    runs = len(seeds)
    out_state = np.full(runs, -1, np.int64)   # final state, -1 unfinished, -2 fault
    out_ticks = np.zeros(runs)
    stack = np.zeros(max_steps + 1, np.int64)
    for r in range(runs):
        np.random.seed(seeds[r])
        label, state, height, ticks = init_label, init_state, 0, 0.0
        for _ in range(max_steps):
            k = kind[label]
            if k == 3:
                out_state[r] = state
                break
            ticks += tick[label]
            if k == 1:
                stack[height] = call_ret[label]
                height += 1
                label = call_target[label]
            elif k == 2:
                if height == 0:
                    label = term_slot
                else:
                    height -= 1
                    label = stack[height]
            else:
                cnt = count[label, state]
                if cnt == 0:
                    break
                base = start[label, state]
                u = np.random.random()
                j = 0
                while j < cnt - 1 and u >= cum[base + j]:
                    j += 1
                nl = nxt_l[base + j]
                if nl < 0:
                    out_state[r] = -2
                    break
                label = nl
                state = nxt_s[base + j]
        if out_state[r] == -1 and kind[label] == 3:
            out_state[r] = state
        out_ticks[r] = ticks
    return out_state, out_ticks


try:
    import numba

    _simulate_kernel = numba.njit(cache=False)(_simulate_py)
except ImportError:  # pragma: no cover - numba is a declared dependency
    _simulate_kernel = _simulate_py


def simulate(prog, sigma0, f: Expectation, runs: int = 10000, max_steps: int = 10000,
             seed: int = 0, cost: Optional[CostModel] = None) -> dict:
    """Monte-Carlo estimate of the expected reward; deterministic given ``seed``."""
    if runs < 1:
        raise ValueError("runs must be at least 1")
    lp = _labeled(prog)
    sp = f.space
    s0 = _state_index(sp, sigma0)
    (slot, kind, call_target, call_ret, tick, start, count,
     cum, nxt_l, nxt_s) = _compile(lp, sp, CostModel.parse(cost))
    seeds = np.random.SeedSequence(seed).generate_state(runs).astype(np.int64) & 0x7FFFFFFF
    final, ticks = _simulate_kernel(slot[lp.main_init], s0, seeds, max_steps, kind, call_target,
                                    call_ret, tick, start, count, cum, nxt_l, nxt_s, slot[TERM])
    if (final == -2).any():
        raise DomainViolation(f"a simulated run faulted from {sp.state(s0)}", sp.state(s0))
    done = final >= 0
    rewards = np.where(done, f.values[np.where(done, final, 0)], 0.0)
    mean = float(rewards.mean())
    sd = float(rewards.std(ddof=1)) if runs > 1 and np.isfinite(mean) else 0.0
    half = 1.96 * sd / np.sqrt(runs)
    return {
        "mean_reward": "inf" if np.isinf(mean) else mean,
        "term_fraction": float(done.mean()),
        "ci95": [float(mean - half), float(mean + half)] if np.isfinite(mean) else ["inf", "inf"],
        "mean_ticks_terminated": float(ticks[done].mean()) if done.any() else None,
        "runs": runs,
        "max_steps": max_steps,
        "seed": seed,
    }


# -- DOT export ----------------------------------------------------------------

def _fmt_p(p: Fraction) -> str:
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


def export_dot(prog) -> str:
    """Label-level transition graph; edges carry ``pop,prob,push``."""
    from .parser import bexpr_to_source

    lp = _labeled(prog)
    show = lambda l: {DOWN: "↓", TERM: "Term"}.get(l, str(l))
    edges: List[Tuple[str, str, str]] = []
    returns = []
    for l in lp.labels:
        c = lp.stmt[l]
        s1 = lp.succ1[l]
        if isinstance(c, (Skip, Assign)):
            edges.append((show(l), show(s1), "γ,1,γ"))
        elif isinstance(c, Abort):
            edges.append((show(l), show(l), "γ,1,γ"))
        elif isinstance(c, UniformAssign):
            edges.append((show(l), show(s1), "γ,uniform,γ"))
            edges.append((show(l), show(l), "γ,[empty range],γ"))
        elif isinstance(c, If):
            g = bexpr_to_source(c.guard)
            edges.append((show(l), show(s1), f"γ,[{g}],γ"))
            edges.append((show(l), show(lp.succ2[l]), f"γ,[!({g})],γ"))
        elif isinstance(c, PChoice):
            if c.prob > 0:
                edges.append((show(l), show(s1), f"γ,{_fmt_p(c.prob)},γ"))
            if c.prob < 1:
                edges.append((show(l), show(lp.succ2[l]), f"γ,{_fmt_p(1 - c.prob)},γ"))
        elif isinstance(c, Call):
            edges.append((show(l), show(lp.proc_init[c.proc]), f"γ,1,γ·{show(s1)}"))
            if s1 not in returns:
                returns.append(s1)
    for r in returns:
        edges.append(("↓", show(r), f"{show(r)},1,ε"))
    edges.append(("↓", "Term", "γ₀,1,γ₀"))
    edges.append(("Term", "Term", "γ₀,1,γ₀"))
    nodes = [show(l) for l in lp.labels] + ["↓", "Term"]
    lines = ["digraph prmc {", "  rankdir=LR;", f'  init [shape=point]; init -> "{show(lp.main_init)}";']
    for n in nodes:
        shape = "doublecircle" if n == "Term" else "circle"
        lines.append(f'  "{n}" [shape={shape}];')
    for a, b, lab in edges:
        lines.append(f'  "{a}" -> "{b}" [label="{lab}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
