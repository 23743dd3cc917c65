from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from minijl.frontend import ParseError, lower_toplevel, parse
from minijl.frontend.lexer import tokenize
from minijl.frontend.lower import MethodItem, ThunkItem, TypeItem
from minijl.ir import dump, read
from conftest import PROGRAMS

GOLDEN = """\
function f(x)
  1: (return (call + x 1))
end
function g(n)
  1: (= s 0)
  2: (gotoif (call > n 0) 6)
  3: (= s (call + s n))
  4: (= n (call - n 1))
  5: (goto 2)
  6: (return s)
end
function h(x, ys...)
  1: (return (call tuple x (... ys)))
end"""

SOURCE = """\
f(x) = x + 1
function g(n)
    s = 0
    while n > 0
        s += n
        n = n - 1
    end
    s
end
h(x::Int64, ys...) = tuple(x, ys...)
"""


def _codes(src):
    return [it.code for it in lower_toplevel(src, {}) if isinstance(it, (MethodItem, ThunkItem))]


def test_lowering_golden():
    assert "\n".join(dump(c) for c in _codes(SOURCE)) == GOLDEN


def _sources():
    boot = resources.files("minijl") / "boot"
    names = (boot / "MANIFEST").read_text().split()
    out = [(n, (boot / n).read_text()) for n in names]
    out += [(p.name, p.read_text()) for p in PROGRAMS]
    return out


@pytest.mark.parametrize("name,src", _sources(), ids=lambda x: x if isinstance(x, str) and x.endswith(".jl") else "")
def test_ir_round_trip(name, src):
    for code in _codes(src):
        text = dump(code)
        back = read(text)
        assert len(back) == 1
        assert dump(back[0]) == text
        assert back[0].body == code.body
        assert back[0].params == code.params


def test_goto_targets_in_range():
    for code in _codes(SOURCE):
        code.verify()


def test_types_lower_to_type_items():
    items = lower_toplevel("abstract Shape\ntype Circle <: Shape\n r::Float64\nend\n", {})
    assert [type(i) for i in items] == [TypeItem, TypeItem]


def test_ternary_and_short_circuit_lower_to_gotoif():
    (code,) = _codes("k(a, b) = a && b ? 1 : 2\n")
    assert dump(code) == """\
function k(a, b)
  1: (gotoif a 5)
  2: (gotoif b 5)
  3: (= #1 1)
  4: (goto 6)
  5: (= #1 2)
  6: (return #1)
end"""


def test_index_sugar_lowers_to_ref():
    (code,) = _codes("z(t) = t[2]\n")
    assert "(call ref t 2)" in dump(code)


def test_for_loop_uses_iteration_protocol():
    (code,) = _codes("function w(r)\n for i = r\n  println(i)\n end\nend\n")
    text = dump(code)
    for name in ("start", "done", "next"):
        assert f"(call {name} " in text


@pytest.mark.parametrize("src", ["x = (", "f(x = 1", "function f(x)\n x\n", "1 +", "end"])
def test_parse_errors(src):
    with pytest.raises(ParseError):
        lower_toplevel(src, {})


def test_unsupported_construct_reports_position():
    with pytest.raises(ParseError) as e:
        tokenize("a = $b")
    assert "line 1" in str(e.value)


def test_parse_nodes():
    tree = parse("a + b * c\n")
    assert tree.head == "toplevel"
    assert len(tree.args) == 1


# generated arithmetic bodies round-trip through the IR reader
_atom = st.one_of(st.sampled_from(["x", "y", "1", "2.5", '"s"']),
                  st.integers(min_value=0, max_value=99).map(str))
_expr = st.recursive(
    _atom,
    lambda e: st.one_of(
        st.tuples(e, st.sampled_from(["+", "-", "*", "<", "=="]), e).map(lambda t: f"({t[0]} {t[1]} {t[2]})"),
        st.tuples(e, e, e).map(lambda t: f"({t[0]} ? {t[1]} : {t[2]})"),
        st.lists(e, min_size=0, max_size=3).map(lambda xs: "foo(" + ", ".join(xs) + ")"),
    ),
    max_leaves=8,
)


@settings(max_examples=150, deadline=None)
@given(_expr)
def test_prop_generated_round_trip(body):
    (code,) = _codes(f"q(x, y) = {body}\n")
    text = dump(code)
    (back,) = read(text)
    assert dump(back) == text
    code.verify()
