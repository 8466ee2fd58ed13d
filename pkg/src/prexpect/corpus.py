"""Embedded example programs."""
from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import PrexpectError
from .parser import parse_program
from .syntax import Program


_BINSEARCH_BODY = """\
proc B {
  mid := uniform(left, right);
  if (left < right) {
    if (a[mid] < val) {
      left := min(mid + 1, right); call B
    } else {
      if (a[mid] > val) {
        right := max(mid - 1, left); call B
      } else { skip }
    }
  } else { skip }
}
main { call B }
"""


def binsearch_source(size: int = 6) -> str:
    """Binary search with random pivot over an array of ``size`` elements."""
    if size < 1:
        raise ValueError("array size must be positive")
    hi = size - 1
    head = (f"param a : array int;\nparam val : int;\n"
            f"var left : 0..{hi};\nvar right : 0..{hi};\nvar mid : 0..{hi};\n")
    return head + _BINSEARCH_BODY


_SOURCES: Dict[str, Tuple[str, str]] = {
    "coins": ("a fair and a biased coin flipped one after the other", """\
var x : 0..1;
var y : 0..1;
main { {x := 0} [1/2] {x := 1}; {y := 0} [1/3] {y := 1} }
"""),
    "rec3": ("terminates with probability (sqrt(5)-1)/2", """\
proc P { {skip} [1/2] {call P; call P; call P} }
main { call P }
"""),
    "fact": ("factorial that sometimes skips a factor", """\
var x : -2..5;
var y : 0..120;
proc F {
  if (x <= 0) { y := 1 } else {
    { x := x - 1; call F; x := x + 1 } [5/6] { x := x - 2; call F; x := x + 2 };
    y := y * x
  }
}
main { call F }
"""),
    "binsearch": ("binary search with a uniformly chosen pivot", binsearch_source(6)),
    "evenodd": ("two mutually recursive procedures", """\
proc E { {skip} [1/2] {call O} }
proc O { {abort} [1/2] {call E} }
main { call E }
"""),
    "skiporabort": ("finite runtime without almost-sure termination", """\
main { {skip} [1/2] {abort} }
"""),
    "randomwalk": ("symmetric walk on 0..6 absorbed at both ends", """\
var x : 0..6;
main {
  while (0 < x && x < 6) { {x := x - 1} [1/2] {x := x + 1} }
}
"""),
}

# parameter bindings used when the caller gives none
DEFAULT_BINDINGS: Dict[str, Dict[str, object]] = {
    "binsearch": {"a": [1, 3, 5, 7, 9, 11], "val": 7},
}


def names() -> List[str]:
    return list(_SOURCES)


def list_corpus() -> List[Tuple[str, str]]:
    return [(name, desc) for name, (desc, _) in _SOURCES.items()]


def show(name: str) -> str:
    try:
        return _SOURCES[name][1]
    except KeyError:
        raise PrexpectError(f"no corpus program named {name!r}; try one of {', '.join(_SOURCES)}") from None


def load(name: str) -> Program:
    return parse_program(show(name), origin=f"<corpus:{name}>")


def default_bindings(name: str) -> Dict[str, object]:
    return dict(DEFAULT_BINDINGS.get(name, {}))
