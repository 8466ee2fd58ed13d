import pytest

from prexpect import corpus
from prexpect.errors import PrexpectError
from prexpect.parser import parse_program, to_source
from prexpect.semantics import StateSpace


def test_list_has_seven_entries():
    names = [n for n, _ in corpus.list_corpus()]
    assert names == ["coins", "rec3", "fact", "binsearch", "evenodd", "skiporabort", "randomwalk"]


@pytest.mark.parametrize("name", corpus.names())
def test_every_program_elaborates(name):
    prog = corpus.load(name)
    StateSpace.of(prog, corpus.default_bindings(name))
    assert parse_program(corpus.show(name)) == prog


def test_show_rec3_round_trip():
    assert parse_program(corpus.show("rec3")) == parse_program(to_source(corpus.load("rec3")))


def test_show_unknown():
    with pytest.raises(PrexpectError):
        corpus.show("nope")


@pytest.mark.parametrize("k", range(1, 7))
def test_binsearch_sizes(k):
    prog = parse_program(corpus.binsearch_source(k))
    sp = StateSpace.of(prog, {"a": list(range(k)), "val": 0})
    assert sp.size == k ** 3
