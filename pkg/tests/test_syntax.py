from fractions import Fraction

import pytest

from prexpect.errors import ElaborationError
from prexpect.parser import parse_program
from prexpect.syntax import (DOWN, Abort, Call, If, PChoice, Program, Seq, Skip, called_procs,
                             desugar_while, inline, is_closed, iter_commands, label_program, seq,
                             substitute_calls)
from prexpect.transformers import wp

from conftest import expect, space_of

REC3 = "proc P { {skip} [1/2] {call P; call P; call P} } main { call P }"


def test_substitute_calls_examples():
    assert substitute_calls(Skip(), "P", Abort()) == Skip()
    assert substitute_calls(Call("P"), "P", Abort()) == Abort()
    assert substitute_calls(Seq(Call("P"), Call("Q")), "P", Skip()) == Seq(Skip(), Call("Q"))


def test_inline_levels():
    procs = parse_program(REC3).procs
    assert inline(procs, "P", 0) == Abort()
    one = inline(procs, "P", 1)
    assert one == PChoice(Skip(), Fraction(1, 2), seq(Abort(), Abort(), Abort()))
    assert inline({"P": Skip()}, "P", 3) == Skip()


@pytest.mark.parametrize("n", range(6))
def test_inline_is_closed(n):
    prog = parse_program("proc E { {skip} [1/2] {call O} } proc O { {abort} [1/2] {call E} } main { call E }")
    assert is_closed(inline(prog.procs, "E", n))


def test_inline_unfolds_one_level_at_a_time():
    procs = parse_program(REC3).procs
    for n in range(4):
        by_def = substitute_calls(procs["P"], {"P": inline(procs, "P", n)})
        assert inline(procs, "P", n + 1) == by_def


def test_inline_rejects_undeclared_target():
    with pytest.raises(ElaborationError):
        inline({"P": Call("Q")}, "P", 2)


def test_desugar_while_shape():
    g = parse_program("var x : 0..3; main { skip }")
    name, body = desugar_while("G", Skip(), "__w")
    assert name == "__w"
    assert body == If("G", Seq(Skip(), Call("__w")), Skip())


def test_while_false_is_skip():
    prog = parse_program("var x : 0..3; main { while (false) { skip } }")
    sp = space_of(prog)
    f = expect("x", prog, sp)
    val, _ = wp(prog, f)
    assert list(val.values) == list(f.values)


def test_countdown_reaches_zero():
    prog = parse_program("var x : 0..3; main { while (x > 0) { x := x - 1 } }")
    sp = space_of(prog)
    val, _ = wp(prog, expect("[x = 0]", prog, sp))
    assert list(val.values) == [1.0] * 4


def test_nested_while_gets_two_procedures():
    prog = parse_program("var x : 0..2; var y : 0..2; main { while (x > 0) { x := x - 1; "
                         "while (y > 0) { y := y - 1 } } }")
    loops = [p for p, _ in prog.decls]
    assert len(loops) == 2 and len(set(loops)) == 2


def test_reserved_prefix_rejected_in_source():
    from prexpect.errors import PrexpectError
    with pytest.raises(PrexpectError):
        parse_program("proc __while0 { skip } main { skip }")


def test_labels_of_rec3_body():
    lp = label_program(parse_program(REC3))
    assert lp.proc_init["P"] == 2
    assert lp.succ1[1] == DOWN
    assert lp.succ2[2] == 3
    assert isinstance(lp.stmt[2], PChoice)
    assert [lp.succ1[l] for l in (3, 4, 5)] == [4, 5, DOWN]


def test_labels_skip_only_main():
    lp = label_program(parse_program("main { skip }"))
    assert lp.labels == [1]
    assert lp.succ1[1] == DOWN


def test_labels_sequence_successor():
    lp = label_program(parse_program("var x : 0..1; main { x := 1; x := 0 }"))
    assert lp.succ1[1] == 2 and lp.succ1[2] == DOWN


def test_labeling_is_bijective():
    prog = parse_program("var x : 0..3; proc P { if (x > 0) { x := x - 1; call P } else { skip } } "
                         "main { {call P} [1/3] {x := uniform(0, 3); call P} }")
    lp = label_program(prog)
    atoms = [c for _, body in prog.decls for c in iter_commands(body) if not isinstance(c, Seq)]
    atoms += [c for c in iter_commands(prog.main) if not isinstance(c, Seq)]
    assert len(lp.labels) == len(atoms) == len(set(lp.labels))


def test_called_procs():
    prog = parse_program(REC3)
    assert called_procs(prog.body("P")) == ["P", "P", "P"]
