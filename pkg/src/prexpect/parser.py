"""Hand-written recursive-descent parser for pRGCL and the expectation DSL.

Program syntax::

    param a : array int;   param val : int;
    var x : 0..5;
    proc P { {skip} [1/2] {call P; call P} }
    main { x := uniform(0, 5); if (x < 3) { call P } else { skip } }

Comments run from ``//`` to the end of the line.  ``else`` branches may be
omitted (they default to ``skip``), a trailing ``;`` inside a block is
accepted and a bare ``{ ... }`` groups statements.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Set, Tuple

from . import dsl
from .errors import ElaborationError, ParseError
from .syntax import (
    RESERVED_PREFIX, Abort, And, ArrayPred, Assign, BinOp, BoolLit, Call, Cmp,
    If, Index, IndexSym, Lit, Neg, Not, Or, ParamDecl, PChoice, Program, Seq,
    Skip, UniformAssign, Var, VarDecl, While, desugar_program, iter_commands,
)

KEYWORDS = {
    "param", "var", "proc", "main", "int", "array", "skip", "abort", "if", "else",
    "while", "call", "uniform", "true", "false", "min", "max",
}
DSL_BUILTINS = {"inf", "harmonic", "pow", "recur", "prev", "sorted", "occurs"}
CMP_OPS = {"<", "<=", ">", ">=", "=", "==", "!="}

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<id>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:=|\.\.|&&|\|\||<=|>=|!=|==|[-+*/%<>=!(){}\[\];,:])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num, id, op, eof
    text: str
    line: int
    col: int


def tokenize(text: str, origin: str = "<inline>") -> List[Token]:
    out: List[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1, origin)
        kind = m.lastgroup
        if kind != "ws":
            out.append(Token(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, text: str, origin: str = "<inline>"):
        self.toks = tokenize(text, origin)
        self.i = 0
        self.origin = origin
        # name resolution context, filled in by the program or DSL entry points
        self.scalars: Set[str] = set()
        self.arrays: Set[str] = set()
        self.resolve = False
        self.allow_index = False
        self.in_recur = 0

    # -- token helpers --
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[Token] = None):
        t = tok or self.tok
        if t.kind == "eof":
            msg = f"{msg} (unexpected end of input)"
        raise ParseError(msg, t.line, t.col, self.origin)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("op", "id") and self.tok.text == text

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            shown = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {shown!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self) -> str:
        t = self.tok
        if t.kind != "id" or t.text in KEYWORDS:
            self.error(f"expected identifier, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        neg = self.accept("-")
        t = self.tok
        if t.kind != "num" or "." in t.text:
            self.error("expected integer literal")
        self.i += 1
        return -int(t.text) if neg else int(t.text)

    def rational(self) -> Fraction:
        t = self.tok
        if t.kind != "num":
            self.error("expected numeric literal")
        self.i += 1
        value = Fraction(t.text)
        if self.at("/") and self.toks[self.i + 1].kind == "num":
            self.i += 1
            d = self.toks[self.i]
            self.i += 1
            if Fraction(d.text) == 0:
                self.error("division by zero", d)
            value = value / Fraction(d.text)
        return value

    # -- integer expressions --
    def iexpr(self):
        left = self.iterm()
        while self.tok.text in ("+", "-") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.iterm())
        return left

    def iterm(self):
        left = self.iunary()
        while self.tok.text in ("*", "%") and self.tok.kind == "op":
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.iunary())
        return left

    def iunary(self):
        if self.accept("-"):
            if self.tok.kind == "num" and "." not in self.tok.text:
                return Lit(-int(self.toks_advance().text))
            return Neg(self.iunary())
        return self.iatom()

    def toks_advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def iatom(self):
        t = self.tok
        if t.kind == "num":
            if "." in t.text:
                self.error("integer expressions take integer literals only")
            self.i += 1
            return Lit(int(t.text))
        if self.accept("("):
            e = self.iexpr()
            self.expect(")")
            return e
        if t.text in ("min", "max") and t.kind == "id":
            self.i += 1
            self.expect("(")
            a = self.iexpr()
            self.expect(",")
            b = self.iexpr()
            self.expect(")")
            return BinOp(t.text, a, b)
        name = self.ident()
        if self.accept("["):
            idx = self.iexpr()
            self.expect("]")
            if self.resolve and name not in self.arrays:
                self.error(f"{name!r} is not an array parameter", t)
            return Index(name, idx)
        return self.name_ref(name, t)

    def name_ref(self, name: str, t: Token):
        if self.allow_index and name == "n":
            return IndexSym()
        if self.resolve:
            if name in self.arrays:
                self.error(f"array {name!r} must be indexed", t)
            if name not in self.scalars:
                if name == "n":
                    raise ElaborationError("index symbol 'n' is not allowed here")
                raise ElaborationError(f"undeclared identifier {name!r} at {t.line}:{t.col}")
        return Var(name)

    # -- boolean expressions --
    def bexpr(self):
        left = self.bconj()
        while self.accept("||"):
            left = Or(left, self.bconj())
        return left

    def bconj(self):
        left = self.bunary()
        while self.accept("&&"):
            left = And(left, self.bunary())
        return left

    def bunary(self):
        if self.accept("!"):
            return Not(self.bunary())
        return self.batom()

    def batom(self):
        t = self.tok
        if t.kind == "id" and t.text in ("true", "false"):
            self.i += 1
            return BoolLit(t.text == "true")
        if t.kind == "id" and t.text in ("sorted", "occurs") and self.toks[self.i + 1].text == "(":
            return self.array_pred()
        if self.at("("):
            save = self.i
            try:
                return self.comparison()
            except ParseError:
                self.i = save
            self.expect("(")
            b = self.bexpr()
            self.expect(")")
            return b
        return self.comparison()

    def comparison(self):
        left = self.iexpr()
        t = self.tok
        if t.kind != "op" or t.text not in CMP_OPS:
            self.error("expected comparison operator")
        self.i += 1
        op = "=" if t.text == "==" else t.text
        return Cmp(op, left, self.iexpr())

    def array_pred(self):
        pred = self.toks_advance().text
        self.expect("(")
        at = self.tok
        arr = self.ident()
        if self.resolve and arr not in self.arrays:
            self.error(f"{arr!r} is not an array parameter", at)
        args = []
        while self.accept(","):
            args.append(self.iexpr())
        self.expect(")")
        want = 2 if pred == "sorted" else 3
        if len(args) != want:
            self.error(f"{pred} takes an array and {want} integer arguments", at)
        return ArrayPred(pred, arr, tuple(args))

    # -- commands --
    def block(self):
        self.expect("{")
        stmts = []
        while not self.at("}"):
            stmts.append(self.stmt())
            if not self.accept(";"):
                break
        self.expect("}")
        if not stmts:
            return Skip()
        out = stmts[-1]
        for c in reversed(stmts[:-1]):
            out = Seq(c, out)
        return out

    def stmt(self):
        t = self.tok
        if self.at("{"):
            left = self.block()
            if self.accept("["):
                pt = self.tok
                p = self.rational()
                if p > 1:
                    self.error(f"probability {p} outside [0, 1]", pt)
                self.expect("]")
                return PChoice(left, p, self.block())
            return left
        if self.accept("skip"):
            return Skip()
        if self.accept("abort"):
            return Abort()
        if self.accept("call"):
            return Call(self.ident())
        if self.accept("if"):
            self.expect("(")
            g = self.bexpr()
            self.expect(")")
            then = self.block()
            orelse = self.block() if self.accept("else") else Skip()
            return If(g, then, orelse)
        if self.accept("while"):
            self.expect("(")
            g = self.bexpr()
            self.expect(")")
            return While(g, self.block())
        if t.kind == "id" and t.text not in KEYWORDS:
            name = self.ident()
            self.expect(":=")
            if self.accept("uniform"):
                self.expect("(")
                lo = self.iexpr()
                self.expect(",")
                hi = self.iexpr()
                self.expect(")")
                return UniformAssign(name, lo, hi)
            return Assign(name, self.iexpr())
        self.error(f"unexpected {t.text or 'end of input'!r} at start of statement")

    def program(self) -> Program:
        params: List[ParamDecl] = []
        vars_: List[VarDecl] = []
        while self.at("param") or self.at("var"):
            if self.accept("param"):
                name = self.ident()
                self.expect(":")
                if self.accept("array"):
                    self.expect("int")
                    params.append(ParamDecl(name, "array"))
                else:
                    self.expect("int")
                    params.append(ParamDecl(name, "int"))
            else:
                self.i += 1
                at = self.tok
                name = self.ident()
                self.expect(":")
                lo = self.integer()
                self.expect("..")
                hi = self.integer()
                if lo > hi:
                    raise ElaborationError(f"empty domain {lo}..{hi} for variable {name!r} at {at.line}:{at.col}")
                vars_.append(VarDecl(name, lo, hi))
            self.expect(";")
        decls = []
        while self.accept("proc"):
            at = self.tok
            name = self.ident()
            if name.startswith(RESERVED_PREFIX):
                self.error(f"procedure names starting with {RESERVED_PREFIX!r} are reserved", at)
            decls.append((name, self.block()))
        self.expect("main")
        main = self.block()
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r} after main block")
        return Program(tuple(decls), main, tuple(vars_), tuple(params))

    # -- expectation DSL --
    def eexpr(self):
        left = self.eterm()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.toks_advance().text
            left = dsl.EBin(op, left, self.eterm())
        return left

    def eterm(self):
        left = self.eatom()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            t = self.toks_advance()
            right = self.eatom()
            if t.text == "/":
                c = constant_value(right)
                if c is None or c <= 0 or c == dsl.INF:
                    self.error("'/' needs a positive finite constant divisor", t)
            left = dsl.EBin(t.text, left, right)
        return left

    def eatom(self):
        t = self.tok
        if t.kind == "num":
            return dsl.ELit(self.rational())
        if self.accept("("):
            e = self.eexpr()
            self.expect(")")
            return e
        if self.at("-"):
            return dsl.ELift(self.iunary())
        if self.accept("["):
            g = self.bexpr()
            self.expect("]")
            return dsl.EIverson(g)
        if t.kind == "id":
            name = t.text
            if name == "inf":
                self.i += 1
                return dsl.ELit(dsl.INF)
            if name == "prev":
                if not self.in_recur:
                    self.error("'prev' is only meaningful inside the step of recur")
                self.i += 1
                return dsl.EPrev()
            if name in ("min", "max") and self.toks[self.i + 1].text == "(":
                self.i += 1
                self.expect("(")
                a = self.eexpr()
                self.expect(",")
                b = self.eexpr()
                self.expect(")")
                return dsl.EBin(name, a, b)
            if name == "harmonic" and self.toks[self.i + 1].text == "(":
                self.i += 1
                self.expect("(")
                k = self.iexpr()
                self.expect(")")
                return dsl.EHarmonic(k)
            if name == "pow" and self.toks[self.i + 1].text == "(":
                self.i += 1
                self.expect("(")
                bt = self.tok
                neg = self.accept("-")
                base = self.rational()
                if neg and base != 0:
                    raise ElaborationError(f"pow base must be non-negative (at {bt.line}:{bt.col})")
                self.expect(",")
                k = self.iexpr()
                self.expect(")")
                return dsl.EPow(base, k)
            if name == "recur" and self.toks[self.i + 1].text == "(":
                self.i += 1
                self.expect("(")
                k = self.iexpr()
                self.expect(",")
                init = self.eexpr()
                self.expect(",")
                self.in_recur += 1
                step = self.eexpr()
                self.in_recur -= 1
                self.expect(")")
                return dsl.ERecur(k, init, step)
            return dsl.ELift(self.iatom())
        self.error(f"unexpected {t.text or 'end of input'!r} in expectation")


def constant_value(e) -> Optional[Fraction]:
    """Value of a variable-free expectation tree, or None."""
    if isinstance(e, dsl.ELit):
        return e.value
    if isinstance(e, dsl.ELift) and isinstance(e.expr, Lit):
        return Fraction(max(e.expr.value, 0))
    if isinstance(e, dsl.EBin):
        a, b = constant_value(e.left), constant_value(e.right)
        if a is None or b is None:
            return None
        if dsl.INF in (a, b):
            if e.op == "*" and 0 in (a, b):
                return Fraction(0)
            if e.op == "-" and b == dsl.INF:
                return Fraction(0)
            if e.op == "min":
                return min(a, b)
            return dsl.INF
        return {
            "+": lambda: a + b, "-": lambda: max(a - b, Fraction(0)), "*": lambda: a * b,
            "/": lambda: a / b, "min": lambda: min(a, b), "max": lambda: max(a, b),
        }[e.op]()
    return None


# -- elaboration ---------------------------------------------------------------

def _names_in_expr(e, out: List[Tuple[str, str]]):
    if isinstance(e, Var):
        out.append(("scalar", e.name))
    elif isinstance(e, Index):
        out.append(("array", e.array))
        _names_in_expr(e.index, out)
    elif isinstance(e, (BinOp, Cmp, And, Or)):
        _names_in_expr(e.left, out)
        _names_in_expr(e.right, out)
    elif isinstance(e, (Neg, Not)):
        _names_in_expr(e.operand, out)
    elif isinstance(e, ArrayPred):
        out.append(("array", e.array))
        for a in e.args:
            _names_in_expr(a, out)


def check_program(prog: Program) -> Program:
    """Static checks shared by parsed and hand-built programs."""
    var_names = [v.name for v in prog.vars]
    names = var_names + [p.name for p in prog.params]
    dup = {n for n in names if names.count(n) > 1}
    if dup:
        raise ElaborationError(f"duplicate declaration of {sorted(dup)[0]!r}")
    for v in prog.vars:
        if v.lo > v.hi:
            raise ElaborationError(f"empty domain {v.lo}..{v.hi} for variable {v.name!r}")
    procs = [p for p, _ in prog.decls]
    dup = {p for p in procs if procs.count(p) > 1}
    if dup:
        raise ElaborationError(f"procedure {sorted(dup)[0]!r} declared twice")
    scalars = set(var_names) | {p.name for p in prog.params if p.kind == "int"}
    arrays = {p.name for p in prog.params if p.kind == "array"}
    bodies = [(p, b) for p, b in prog.decls] + [("main", prog.main)]
    for owner, body in bodies:
        for node in iter_commands(body):
            exprs = []
            if isinstance(node, (Assign, UniformAssign)):
                if node.var not in var_names:
                    what = "parameter" if node.var in scalars | arrays else "variable"
                    raise ElaborationError(f"assignment to undeclared or read-only {what} {node.var!r} in {owner}")
                exprs = [node.expr] if isinstance(node, Assign) else [node.lo, node.hi]
            elif isinstance(node, (If, While)):
                exprs = [node.guard]
            elif isinstance(node, Call) and node.proc not in procs:
                raise ElaborationError(f"call to undeclared procedure {node.proc!r} in {owner}")
            found: List[Tuple[str, str]] = []
            for e in exprs:
                _names_in_expr(e, found)
            for kind, name in found:
                pool = scalars if kind == "scalar" else arrays
                if name not in pool:
                    raise ElaborationError(f"undeclared {'array parameter' if kind == 'array' else 'identifier'} {name!r} in {owner}")
    return prog


def parse_program(text: str, origin: str = "<inline>") -> Program:
    """Parse, check and desugar a program.  ``while`` loops become calls."""
    p = _Parser(text, origin)
    prog = p.program()
    check_program(prog)
    return desugar_program(prog)


def parse_expectation(text: str, prog: Program, allow_index: bool = False):
    """Parse a DSL expression against ``prog``'s declared names."""
    p = _Parser(text)
    p.resolve = True
    p.allow_index = allow_index
    p.scalars = {v.name for v in prog.vars} | {q.name for q in prog.params if q.kind == "int"}
    p.arrays = {q.name for q in prog.params if q.kind == "array"}
    if allow_index and "n" in p.scalars | p.arrays:
        raise ElaborationError("program declares 'n', which clashes with the index symbol")
    e = p.eexpr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after expectation")
    return e


def parse_bexpr(text: str, prog: Program):
    p = _Parser(text)
    p.resolve = True
    p.scalars = {v.name for v in prog.vars} | {q.name for q in prog.params if q.kind == "int"}
    p.arrays = {q.name for q in prog.params if q.kind == "array"}
    b = p.bexpr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r} after expression")
    return b


# -- pretty printing ----------------------------------------------------------

def fmt_rational(q) -> str:
    if q == dsl.INF:
        return "inf"
    q = Fraction(q)
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def iexpr_to_source(e) -> str:
    if isinstance(e, Lit):
        return str(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, IndexSym):
        return "n"
    if isinstance(e, Index):
        return f"{e.array}[{iexpr_to_source(e.index)}]"
    if isinstance(e, Neg):
        return f"-({iexpr_to_source(e.operand)})"
    if isinstance(e, BinOp):
        if e.op in ("min", "max"):
            return f"{e.op}({iexpr_to_source(e.left)}, {iexpr_to_source(e.right)})"
        return f"({iexpr_to_source(e.left)} {e.op} {iexpr_to_source(e.right)})"
    raise TypeError(f"not an integer expression: {e!r}")


def bexpr_to_source(b) -> str:
    if isinstance(b, BoolLit):
        return "true" if b.value else "false"
    if isinstance(b, Cmp):
        return f"{iexpr_to_source(b.left)} {b.op} {iexpr_to_source(b.right)}"
    if isinstance(b, And):
        return f"({bexpr_to_source(b.left)} && {bexpr_to_source(b.right)})"
    if isinstance(b, Or):
        return f"({bexpr_to_source(b.left)} || {bexpr_to_source(b.right)})"
    if isinstance(b, Not):
        return f"!({bexpr_to_source(b.operand)})"
    if isinstance(b, ArrayPred):
        args = ", ".join(iexpr_to_source(a) for a in b.args)
        return f"{b.pred}({b.array}, {args})"
    raise TypeError(f"not a boolean expression: {b!r}")


def expectation_to_source(e) -> str:
    if isinstance(e, dsl.ELit):
        return fmt_rational(e.value)
    if isinstance(e, dsl.EIverson):
        return f"[{bexpr_to_source(e.guard)}]"
    if isinstance(e, dsl.ELift):
        s = iexpr_to_source(e.expr)
        return s if s.startswith("(") or isinstance(e.expr, (Var, Index, IndexSym)) else f"({s})"
    if isinstance(e, dsl.EBin):
        l, r = expectation_to_source(e.left), expectation_to_source(e.right)
        if e.op in ("min", "max"):
            return f"{e.op}({l}, {r})"
        return f"({l} {e.op} {r})"
    if isinstance(e, dsl.EHarmonic):
        return f"harmonic({iexpr_to_source(e.arg)})"
    if isinstance(e, dsl.EPow):
        return f"pow({fmt_rational(e.base)}, {iexpr_to_source(e.exponent)})"
    if isinstance(e, dsl.ERecur):
        return (f"recur({iexpr_to_source(e.count)}, {expectation_to_source(e.init)}, "
                f"{expectation_to_source(e.step)})")
    if isinstance(e, dsl.EPrev):
        return "prev"
    raise TypeError(f"not an expectation: {e!r}")


def _while_form(name: str, body) -> Optional[tuple]:
    """Return (guard, loop body) if ``body`` is the desugared form of a loop."""
    if (name.startswith(RESERVED_PREFIX) and isinstance(body, If)
            and isinstance(body.orelse, Skip) and isinstance(body.then, Seq)
            and body.then.second == Call(name)):
        return body.guard, body.then.first
    return None


def command_to_source(c, loops: Optional[Dict[str, tuple]] = None, indent: int = 1) -> str:
    loops = loops or {}
    pad = "  " * indent

    def blk(x) -> str:
        inner = command_to_source(x, loops, indent + 1)
        return "{\n" + inner + "\n" + pad + "}"

    if isinstance(c, Seq):
        return command_to_source(c.first, loops, indent) + ";\n" + command_to_source(c.second, loops, indent)
    if isinstance(c, Skip):
        return pad + "skip"
    if isinstance(c, Abort):
        return pad + "abort"
    if isinstance(c, Assign):
        return f"{pad}{c.var} := {iexpr_to_source(c.expr)}"
    if isinstance(c, UniformAssign):
        return f"{pad}{c.var} := uniform({iexpr_to_source(c.lo)}, {iexpr_to_source(c.hi)})"
    if isinstance(c, Call):
        if c.proc in loops:
            guard, body = loops[c.proc]
            return f"{pad}while ({bexpr_to_source(guard)}) {blk(body)}"
        return f"{pad}call {c.proc}"
    if isinstance(c, While):
        return f"{pad}while ({bexpr_to_source(c.guard)}) {blk(c.body)}"
    if isinstance(c, If):
        return f"{pad}if ({bexpr_to_source(c.guard)}) {blk(c.then)} else {blk(c.orelse)}"
    if isinstance(c, PChoice):
        return f"{pad}{blk(c.left)} [{fmt_rational(c.prob)}] {blk(c.right)}"
    raise TypeError(f"not a command: {c!r}")


def to_source(prog: Program) -> str:
    """Concrete syntax for ``prog``; desugared loops are printed as ``while``."""
    loops = {}
    for name, body in prog.decls:
        form = _while_form(name, body)
        if form is not None:
            loops[name] = form
    lines = []
    for p in prog.params:
        lines.append(f"param {p.name} : {'array int' if p.kind == 'array' else 'int'};")
    for v in prog.vars:
        lines.append(f"var {v.name} : {v.lo}..{v.hi};")
    for name, body in prog.decls:
        if name in loops:
            continue
        lines.append(f"proc {name} {{\n{command_to_source(body, loops)}\n}}")
    lines.append(f"main {{\n{command_to_source(prog.main, loops)}\n}}")
    return "\n".join(lines) + "\n"
