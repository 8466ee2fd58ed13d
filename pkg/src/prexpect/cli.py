"""``prexpect`` command line.

Exit codes: 0 success / accepted, 1 rejected or violated bound,
2 inconclusive or not converged, 3 usage, parse or elaboration error.
"""
from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import tomli

from . import corpus
from .errors import PrexpectError
from .parser import parse_expectation, parse_program
from .rules import RULES, RuleClaim, check
from .semantics import INF, Expectation, StateSpace, eval_expectation
from .syntax import Program
from .transformers import CostModel, ert, result_json, wlp, wp

EXIT_OK, EXIT_REJECTED, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_schema(name: str) -> dict:
    text = resources.files("prexpect").joinpath("schemas", f"{name}.json").read_text("utf-8")
    return json.loads(text)


def _emit(payload, schema: str, as_json: bool, plain) -> None:
    if as_json:
        jsonschema.validate(payload, load_schema(schema))
        print(json.dumps(payload, indent=2, ensure_ascii=False))
    else:
        plain(payload)


# -- argument helpers ----------------------------------------------------------

def _parse_binds(items: Sequence[str]) -> Dict[str, object]:
    out: Dict[str, object] = {}
    for item in items or ():
        name, eq, raw = item.partition("=")
        name = name.strip()
        if not eq or not name:
            raise UsageError(f"bad binding {item!r}; expected name=value")
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            raise UsageError(f"bad value in binding {item!r}") from None
        if isinstance(val, list):
            if not all(isinstance(v, int) for v in val):
                raise UsageError(f"array binding {name!r} must hold integers")
        elif not isinstance(val, int) or isinstance(val, bool):
            raise UsageError(f"binding {name!r} must be an integer or an integer array")
        out[name] = val
    return out


def _load_program(args) -> Tuple[Program, str]:
    if bool(args.corpus) == bool(args.file):
        raise UsageError("give exactly one of --corpus NAME or --file PATH")
    if args.corpus:
        if args.corpus not in corpus.names():
            raise UsageError(f"no corpus program named {args.corpus!r}")
        return corpus.load(args.corpus), args.corpus
    try:
        with open(args.file, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise UsageError(f"cannot read {args.file}: {err.strerror}") from None
    return parse_program(text, origin=args.file), args.file


def _space_and_state(args, prog: Program) -> Tuple[StateSpace, Dict[str, int]]:
    """Split bindings into parameters and a (possibly partial) initial state."""
    binds = _parse_binds(args.bind)
    params = {p.name for p in prog.params}
    var_names = {v.name for v in prog.vars}
    unknown = set(binds) - params - var_names
    if unknown:
        raise UsageError(f"unknown names in --bind: {', '.join(sorted(unknown))}")
    pvals = corpus.default_bindings(args.corpus) if args.corpus else {}
    pvals.update({k: v for k, v in binds.items() if k in params})
    missing = params - set(pvals)
    if missing:
        raise UsageError(f"unbound parameters: {', '.join(sorted(missing))}")
    sp = StateSpace.of(prog, pvals)
    state = {k: v for k, v in binds.items() if k in var_names}
    for k, v in state.items():
        d = sp.decl(k)
        if isinstance(v, list) or not d.lo <= v <= d.hi:
            raise UsageError(f"{k} = {v} outside its domain {d.lo}..{d.hi}")
    return sp, state


def _selected(sp: StateSpace, state: Dict[str, int]) -> List[int]:
    mask = np.ones(sp.size, dtype=bool)
    for k, v in state.items():
        mask &= sp.column(k) == v
    return [int(i) for i in np.flatnonzero(mask)]


def _full_state(sp: StateSpace, state: Dict[str, int], what: str) -> int:
    missing = [n for n in sp.names if n not in state]
    if missing:
        raise UsageError(f"{what} needs a complete initial state; bind {', '.join(missing)}")
    return sp.index_of(state)


def _expectation(text: str, prog: Program, sp: StateSpace) -> Expectation:
    return eval_expectation(parse_expectation(text, prog), sp)


def _state_key(sp: StateSpace, i: int) -> str:
    return ",".join(f"{k}={v}" for k, v in sp.state(i).items()) or "*"


def _fmt(x) -> str:
    if isinstance(x, str):
        return x
    if x is None:
        return "-"
    return "inf" if np.isinf(x) else f"{x:.10g}"


def _table(rows: List[Tuple[str, str]], head: Tuple[str, str]) -> None:
    w = max([len(head[0])] + [len(r[0]) for r in rows])
    print(f"{head[0]:<{w}}  {head[1]}")
    for a, b in rows:
        print(f"{a:<{w}}  {b}")


def _cost(args) -> CostModel:
    try:
        return CostModel.parse(args.cost_model)
    except ValueError as err:
        raise UsageError(str(err)) from None


# -- commands ------------------------------------------------------------------

def cmd_transform(args) -> int:
    prog, _ = _load_program(args)
    sp, state = _space_and_state(args, prog)
    post = _expectation(args.post, prog, sp)
    if args.command == "wp":
        val, rep = wp(prog, post, args.max_iters, args.tol)
    elif args.command == "wlp":
        val, rep = wlp(prog, post, args.max_iters, args.tol)
    else:
        val, rep = ert(prog, post, args.max_iters, args.tol, _cost(args))
    payload = result_json(args.command, args.post, val, rep)
    keep = {_state_key(sp, i) for i in _selected(sp, state)}
    payload["values"] = {k: v for k, v in payload["values"].items() if k in keep}
    d = float(rep.delta_last)
    payload["delta_last"] = "inf" if np.isinf(d) else d
    if args.command == "ert":
        payload["cost_model"] = _cost(args).to_dict()

    def plain(p):
        _table([(k, _fmt(v)) for k, v in p["values"].items()], ("state", args.command))
        status = "converged" if p["converged"] else "NOT converged"
        print(f"# {status} after {p['iterations']} iterations "
              f"({p['direction']} bound, last delta {_fmt(p['delta_last'])})")

    _emit(payload, "transformer", args.json, plain)
    return EXIT_OK if rep.converged else EXIT_INCONCLUSIVE


def cmd_simulate(args) -> int:
    from .operational import simulate

    prog, _ = _load_program(args)
    sp, state = _space_and_state(args, prog)
    s0 = _full_state(sp, state, "simulate")
    f = _expectation(args.post, prog, sp)
    out = simulate(prog, s0, f, runs=args.runs, max_steps=args.max_steps, seed=args.seed, cost=_cost(args))
    out["state"] = sp.state(s0)

    def plain(p):
        for k in ("mean_reward", "term_fraction", "ci95", "mean_ticks_terminated", "runs", "max_steps", "seed"):
            v = p[k]
            shown = "[" + ", ".join(_fmt(x) for x in v) + "]" if isinstance(v, list) else _fmt(v) \
                if not isinstance(v, int) else str(v)
            print(f"{k:<22} {shown}")

    _emit(out, "simulate", args.json, plain)
    return EXIT_OK


def cmd_prmc(args) -> int:
    from .operational import export_dot, expected_reward_bounded, expected_runtime_bounded

    prog, _ = _load_program(args)
    if args.dot:
        print(export_dot(prog), end="")
        return EXIT_OK
    sp, state = _space_and_state(args, prog)
    s0 = _full_state(sp, state, "prmc")
    if args.runtime:
        res = expected_runtime_bounded(prog, s0, sp, args.stack_bound, _cost(args))
    else:
        res = expected_reward_bounded(prog, s0, _expectation(args.post, prog, sp), args.stack_bound)
    out = res.to_json()
    out.update(stack_bound=args.stack_bound, quantity="runtime" if args.runtime else "reward",
               state=sp.state(s0))

    def plain(p):
        for k in ("quantity", "value", "truncated", "configs", "stack_bound"):
            print(f"{k:<12} {_fmt(p[k]) if not isinstance(p[k], (bool, int)) else p[k]}")

    _emit(out, "prmc", args.json, plain)
    return EXIT_OK


def _claims(args, prog: Program) -> List[RuleClaim]:
    if args.claims:
        try:
            with open(args.claims, encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot load claims from {args.claims}: {err}") from None
        raw = raw if isinstance(raw, list) else [raw]
        return [RuleClaim.from_dict(d) for d in raw]
    if not args.rule or not args.proc:
        raise UsageError("check needs --rule and --proc (or --claims FILE)")
    procs = args.proc.split(",")
    bounds = args.bound.split(";") if args.bound else [None] * len(procs)
    posts = args.post.split(";") if ";" in args.post else [args.post] * len(procs)
    if len(bounds) != len(procs) or len(posts) != len(procs):
        raise UsageError("give one bound (and post) per procedure, separated by ';'")
    return [RuleClaim(args.rule, p, post, b, args.lower, args.upper, args.depth)
            for p, post, b in zip(procs, posts, bounds)]


def cmd_check(args) -> int:
    prog, _ = _load_program(args)
    sp, _ = _space_and_state(args, prog)
    verdict = check(prog, _claims(args, prog), sp, cost=_cost(args))
    _emit(verdict.to_json(), "verdict", args.json, lambda p: print(verdict))
    return {"accepted": EXIT_OK, "checked": EXIT_OK, "rejected": EXIT_REJECTED}.get(verdict.status,
                                                                                    EXIT_INCONCLUSIVE)


def cmd_compare(args) -> int:
    from .operational import correspondence_gaps

    prog, _ = _load_program(args)
    sp, state = _space_and_state(args, prog)
    f = _expectation(args.post, prog, sp)
    gaps = correspondence_gaps(prog, f, args.n)
    sel = _selected(sp, state)
    table = {_state_key(sp, i): (None if np.isnan(gaps[i]) else float(gaps[i])) for i in sel}
    finite = [g for g in table.values() if g is not None]
    out = {"n": args.n, "max_gap": max(finite, default=0.0), "gaps": table}

    def plain(p):
        _table([(k, _fmt(v) if v is not None else "fault") for k, v in p["gaps"].items()], ("state", "gap"))
        print(f"# max gap {p['max_gap']:.3g} at n = {p['n']}")

    _emit(out, "compare", args.json, plain)
    return EXIT_OK if out["max_gap"] < args.gap_tol else EXIT_REJECTED


def cmd_corpus(args) -> int:
    if args.action == "list":
        rows = [{"name": n, "description": d} for n, d in corpus.list_corpus()]
        _emit(rows, "corpus", args.json, lambda p: _table([(r["name"], r["description"]) for r in p],
                                                           ("name", "description")))
        return EXIT_OK
    if not args.name:
        raise UsageError("corpus show needs a program name")
    if args.name not in corpus.names():
        raise UsageError(f"no corpus program named {args.name!r}")
    print(corpus.show(args.name), end="")
    return EXIT_OK


# -- parser --------------------------------------------------------------------

DEFAULTS = {"max_iters": 100000, "tol": 1e-9, "cost_model": "default", "runs": 10000,
            "max_steps": 10000, "seed": 0, "stack_bound": None, "depth": 10}


def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    try:
        with open(path, "rb") as fh:
            conf = tomli.load(fh)
    except (OSError, tomli.TOMLDecodeError) as err:
        raise UsageError(f"cannot read config {path}: {err}") from None
    conf = conf.get("prexpect", conf)
    extra = set(conf) - set(DEFAULTS)
    if extra:
        raise UsageError(f"unknown config keys: {', '.join(sorted(extra))}")
    return conf


def _program_opts(p: argparse.ArgumentParser) -> None:
    src = p.add_argument_group("program")
    src.add_argument("--corpus", metavar="NAME", help="embedded example program")
    src.add_argument("--file", metavar="PATH", help="program source file")
    src.add_argument("--bind", action="append", default=[], metavar="NAME=VALUE",
                     help="parameter value or initial-state variable; arrays as a=[1,4,7]")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    p.add_argument("--config", metavar="TOML", help="defaults for numeric options")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="prexpect", description="Expectation transformers and expected runtimes "
                 "for probabilistic programs with recursion.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, hlp in (("wp", "weakest pre-expectation"), ("wlp", "weakest liberal pre-expectation"),
                      ("ert", "expected runtime")):
        p = sub.add_parser(name, help=hlp)
        _program_opts(p)
        p.add_argument("--post", required=True, help="post-expectation (runtime for ert)")
        p.add_argument("--max-iters", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--cost-model", help="default, calls, none or k=v,... (ert only)")
        p.set_defaults(func=cmd_transform)

    p = sub.add_parser("simulate", help="Monte-Carlo estimate from one initial state")
    _program_opts(p)
    p.add_argument("--post", default="1")
    p.add_argument("--runs", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--cost-model")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("prmc", help="exact expected reward on the pushdown chain")
    _program_opts(p)
    p.add_argument("--post", default="1")
    p.add_argument("--stack-bound", type=int)
    p.add_argument("--runtime", action="store_true", help="expected ticks instead of reward")
    p.add_argument("--cost-model")
    p.add_argument("--dot", action="store_true", help="print the label graph in DOT and exit")
    p.set_defaults(func=cmd_prmc)

    p = sub.add_parser("check", help="check a recursion-rule premise")
    _program_opts(p)
    p.add_argument("--rule", choices=RULES)
    p.add_argument("--proc", help="procedure, or comma separated list for a simultaneous check")
    p.add_argument("--post", default="0", help="f (or t); ';' separates one per procedure")
    p.add_argument("--bound", help="g (or u); ';' separates one per procedure")
    p.add_argument("--lower", help="index family l(n) for omega rules")
    p.add_argument("--upper", help="index family u(n) for omega rules")
    p.add_argument("--depth", type=int)
    p.add_argument("--claims", metavar="JSON", help="file with claim objects")
    p.add_argument("--cost-model")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("compare", help="operational vs. denotational gap at inlining depth n")
    _program_opts(p)
    p.add_argument("--post", default="1")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--gap-tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("corpus", help="list or print the embedded programs")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_corpus)
    return ap


def _apply_defaults(args) -> None:
    conf = _load_config(getattr(args, "config", None))
    for key, val in DEFAULTS.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, conf.get(key, val))


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as ex:
        return ex.code if isinstance(ex.code, int) else EXIT_USAGE
    try:
        _apply_defaults(args)
        return args.func(args)
    except (UsageError, PrexpectError, ValueError) as err:
        print(f"prexpect: error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
