"""Abstract syntax of pRGCL and the syntactic operations on it.

Commands are immutable dataclasses.  Probabilities stay exact
(:class:`fractions.Fraction`); numeric engines convert them to floats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterator, List, Mapping, Optional, Tuple, Union

from .errors import ElaborationError

#: Prefix reserved for procedures introduced by ``while`` desugaring.
RESERVED_PREFIX = "__while"


# -- integer and boolean expressions ------------------------------------------

@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Var:
    """A program variable or a scalar parameter."""
    name: str


@dataclass(frozen=True)
class IndexSym:
    """The free index symbol ``n`` of an expectation family."""


@dataclass(frozen=True)
class Index:
    array: str
    index: "IntExpr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * % min max
    left: "IntExpr"
    right: "IntExpr"


@dataclass(frozen=True)
class Neg:
    operand: "IntExpr"


IntExpr = Union[Lit, Var, IndexSym, Index, BinOp, Neg]


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < <= > >= = !=
    left: IntExpr
    right: IntExpr


@dataclass(frozen=True)
class And:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Or:
    left: "BoolExpr"
    right: "BoolExpr"


@dataclass(frozen=True)
class Not:
    operand: "BoolExpr"


@dataclass(frozen=True)
class ArrayPred:
    """``sorted(a, i, j)`` or ``occurs(a, i, j, v)`` over an array parameter."""
    pred: str
    array: str
    args: Tuple[IntExpr, ...]


BoolExpr = Union[BoolLit, Cmp, And, Or, Not, ArrayPred]


# -- commands -----------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    pass


@dataclass(frozen=True)
class Abort:
    pass


@dataclass(frozen=True)
class Assign:
    var: str
    expr: IntExpr


@dataclass(frozen=True)
class UniformAssign:
    var: str
    lo: IntExpr
    hi: IntExpr


@dataclass(frozen=True)
class If:
    guard: BoolExpr
    then: "Command"
    orelse: "Command"


@dataclass(frozen=True)
class PChoice:
    left: "Command"
    prob: Fraction
    right: "Command"

    def __post_init__(self):
        if not isinstance(self.prob, Fraction):
            object.__setattr__(self, "prob", Fraction(self.prob))
        if not 0 <= self.prob <= 1:
            raise ElaborationError(f"probability {self.prob} outside [0, 1]")


@dataclass(frozen=True)
class Call:
    proc: str


@dataclass(frozen=True)
class Seq:
    first: "Command"
    second: "Command"


@dataclass(frozen=True)
class While:
    """Surface-level loop; removed by :func:`desugar_program`."""
    guard: BoolExpr
    body: "Command"


Command = Union[Skip, Abort, Assign, UniformAssign, If, PChoice, Call, Seq, While]
ATOMIC = (Skip, Abort, Assign, UniformAssign)


def seq(*cmds: Command) -> Command:
    """Right-nested sequential composition of one or more commands."""
    if not cmds:
        return Skip()
    out = cmds[-1]
    for c in reversed(cmds[:-1]):
        out = Seq(c, out)
    return out


# -- programs -----------------------------------------------------------------

@dataclass(frozen=True)
class VarDecl:
    name: str
    lo: int
    hi: int


@dataclass(frozen=True)
class ParamDecl:
    name: str
    kind: str  # "int" or "array"


@dataclass(frozen=True)
class Program:
    decls: Tuple[Tuple[str, Command], ...]
    main: Command
    vars: Tuple[VarDecl, ...] = ()
    params: Tuple[ParamDecl, ...] = ()

    def __post_init__(self):
        if isinstance(self.decls, Mapping):
            object.__setattr__(self, "decls", tuple(self.decls.items()))
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "params", tuple(self.params))

    @property
    def procs(self) -> Dict[str, Command]:
        return dict(self.decls)

    @property
    def var_names(self) -> List[str]:
        return [v.name for v in self.vars]

    def body(self, name: str) -> Command:
        for p, c in self.decls:
            if p == name:
                return c
        raise ElaborationError(f"undeclared procedure {name!r}")


def iter_commands(c: Command) -> Iterator[Command]:
    """Pre-order walk over every command node."""
    yield c
    if isinstance(c, (If,)):
        yield from iter_commands(c.then)
        yield from iter_commands(c.orelse)
    elif isinstance(c, PChoice):
        yield from iter_commands(c.left)
        yield from iter_commands(c.right)
    elif isinstance(c, Seq):
        yield from iter_commands(c.first)
        yield from iter_commands(c.second)
    elif isinstance(c, While):
        yield from iter_commands(c.body)


def called_procs(c: Command) -> List[str]:
    return [n.proc for n in iter_commands(c) if isinstance(n, Call)]


def is_abort_free(c: Command) -> bool:
    return not any(isinstance(n, Abort) for n in iter_commands(c))


def program_abort_free(prog: Program) -> bool:
    return is_abort_free(prog.main) and all(is_abort_free(b) for _, b in prog.decls)


def is_closed(c: Command) -> bool:
    return not called_procs(c)


# -- call substitution and inlining -------------------------------------------

def substitute_calls(c: Command, target, replacement: Optional[Command] = None) -> Command:
    """Replace every ``call target`` in ``c`` by ``replacement``.

    ``target`` may also be a mapping from procedure names to replacements,
    in which case all listed procedures are replaced simultaneously.
    """
    table = target if isinstance(target, Mapping) else {target: replacement}
    return _subst(c, table)


def _subst(c: Command, table: Mapping[str, Command]) -> Command:
    if isinstance(c, Call):
        return table.get(c.proc, c)
    if isinstance(c, If):
        return If(c.guard, _subst(c.then, table), _subst(c.orelse, table))
    if isinstance(c, PChoice):
        return PChoice(_subst(c.left, table), c.prob, _subst(c.right, table))
    if isinstance(c, Seq):
        return Seq(_subst(c.first, table), _subst(c.second, table))
    if isinstance(c, While):
        return While(c.guard, _subst(c.body, table))
    return c


def inline(procs: Mapping[str, Command], target: str, n: int) -> Command:
    """The ``n``-th inlining of ``target``: ``abort`` for ``n = 0``, otherwise the
    body with every call replaced by the level ``n - 1`` inlining of its callee."""
    procs = dict(procs)
    if target not in procs:
        raise ElaborationError(f"undeclared procedure {target!r}")
    for name, body in procs.items():
        for callee in called_procs(body):
            if callee not in procs:
                raise ElaborationError(f"procedure {name!r} calls undeclared {callee!r}")
    level = {p: Abort() for p in procs}
    for _ in range(n):
        level = {p: _subst(body, level) for p, body in procs.items()}
    return level[target]


# -- while desugaring ---------------------------------------------------------

def desugar_while(guard: BoolExpr, body: Command, fresh: str,
                  declared: Optional[Mapping[str, Command]] = None) -> Tuple[str, Command]:
    if declared is not None and fresh in declared:
        raise ElaborationError(f"procedure name {fresh!r} already declared")
    return fresh, If(guard, Seq(body, Call(fresh)), Skip())


def desugar_program(prog: Program) -> Program:
    """Replace every ``while`` by a call to a fresh recursive procedure."""
    decls: List[Tuple[str, Command]] = []
    names = {p for p, _ in prog.decls}
    counter = [0]

    def walk(c: Command) -> Command:
        if isinstance(c, While):
            fresh = f"{RESERVED_PREFIX}{counter[0]}"
            counter[0] += 1
            slot = len(decls)
            decls.append((fresh, Skip()))
            name, proc_body = desugar_while(c.guard, walk(c.body), fresh, dict.fromkeys(names))
            names.add(name)
            decls[slot] = (name, proc_body)
            return Call(name)
        if isinstance(c, If):
            return If(c.guard, walk(c.then), walk(c.orelse))
        if isinstance(c, PChoice):
            return PChoice(walk(c.left), c.prob, walk(c.right))
        if isinstance(c, Seq):
            return Seq(walk(c.first), walk(c.second))
        return c

    user = [(p, walk(b)) for p, b in prog.decls]
    main = walk(prog.main)
    return Program(tuple(user + decls), main, prog.vars, prog.params)


# -- labeling -----------------------------------------------------------------

DOWN = "↓"
TERM = "Term"
Label = Union[int, str]


@dataclass
class LabeledProgram:
    """A program with the canonical labeling used by the operational semantics.

    Labels are positive integers assigned in-order: for ``if`` and probabilistic
    choice the left branch is numbered first, then the node itself, then the
    right branch.  Procedure bodies are numbered in declaration order before
    ``main``.  ``Seq`` nodes carry no label.
    """
    program: Program
    stmt: Dict[int, Command] = field(default_factory=dict)
    succ1: Dict[int, Label] = field(default_factory=dict)
    succ2: Dict[int, Label] = field(default_factory=dict)
    proc_init: Dict[str, Label] = field(default_factory=dict)
    main_init: Label = DOWN
    owner: Dict[int, str] = field(default_factory=dict)

    @property
    def labels(self) -> List[int]:
        return sorted(self.stmt)

    def init_of(self, proc: str) -> Label:
        return self.proc_init[proc]


def label_program(prog: Program) -> LabeledProgram:
    lp = LabeledProgram(prog)
    counter = [0]

    def number(c: Command, owner: str):
        # returns a tree mirroring c with labels attached, numbered in-order
        if isinstance(c, Seq):
            return ("seq", number(c.first, owner), number(c.second, owner))
        if isinstance(c, (If, PChoice)):
            left = number(c.then if isinstance(c, If) else c.left, owner)
            counter[0] += 1
            me = counter[0]
            right = number(c.orelse if isinstance(c, If) else c.right, owner)
            lp.stmt[me] = c
            lp.owner[me] = owner
            return ("branch", me, left, right)
        if isinstance(c, While):
            raise ElaborationError("label_program expects a desugared program")
        counter[0] += 1
        lp.stmt[counter[0]] = c
        lp.owner[counter[0]] = owner
        return ("atom", counter[0])

    def init(t) -> int:
        if t[0] == "seq":
            return init(t[1])
        return t[1]

    def link(t, cont: Label):
        kind = t[0]
        if kind == "seq":
            link(t[1], init(t[2]))
            link(t[2], cont)
        elif kind == "branch":
            me = t[1]
            lp.succ1[me] = init(t[2])
            lp.succ2[me] = init(t[3])
            link(t[2], cont)
            link(t[3], cont)
        else:
            lp.succ1[t[1]] = cont
            lp.succ2[t[1]] = DOWN

    trees = []
    for name, body in prog.decls:
        trees.append((name, number(body, name)))
    main_tree = number(prog.main, "main")
    for name, tree in trees:
        link(tree, DOWN)
        lp.proc_init[name] = init(tree)
    link(main_tree, DOWN)
    lp.main_init = init(main_tree)
    return lp
