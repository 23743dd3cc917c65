import pytest

from minijl.ir import Invoke
from minijl.optimize import PASSES, dynamic_call_sites, tuple_sites
from minijl.types import TupleType
from conftest import PROGRAMS, run
from termgen import to_type


def _spec(ctx, name, method_index, *argtypes):
    gf = ctx.globals[name]
    w = TupleType(tuple(to_type(ctx, a) for a in argtypes))
    for m in gf.methods:
        if w in m.specs:
            return m.specs[w]
    raise KeyError(name)


@pytest.mark.parametrize("path", PROGRAMS, ids=lambda p: p.name)
def test_output_identical_with_passes_off(path):
    src = path.read_text()
    on = run(src)
    off = run(src, optimize=False)
    assert on[0] == off[0]
    assert on[1] == off[1]


def test_number_fallback_fully_resolved():
    out, _, ctx = run("println(1 + 2.5)\n")
    assert out == "3.5\n"
    gf = ctx.globals["+"]
    (spec,) = [s for m in gf.methods if "Number" in repr(m) for s in m.specs.values()]
    assert dynamic_call_sites(ctx, spec.code) == 0
    assert tuple_sites(ctx, spec.code) == 0
    assert ctx.stats["elided_tuples"] >= 1


def test_fallback_runs_without_dispatch_or_allocation():
    src = "function loop(n)\n s = 0.0\n for i = 1:n\n  s = s + (i + 0.5)\n end\n s\nend\nprintln(loop(100))\n"
    out, _, ctx = run(src)
    assert out == "5050.0\n" or out == f"{sum(i + 0.5 for i in range(1, 101))}\n"
    assert ctx.stats["dynamic_dispatches"] == 0


@pytest.mark.parametrize("name", ["fib.jl", "pi_sum.jl"])
def test_monomorphic_loops_dispatch_free(name):
    path = [p for p in PROGRAMS if p.name == name][0]
    _, _, ctx = run(path.read_text())
    assert ctx.stats["dynamic_dispatches"] == 0
    _, _, ctx = run(path.read_text(), optimize=False)
    assert ctx.stats["dynamic_dispatches"] > 1000


def test_devirtualized_calls_are_invokes():
    _, _, ctx = run("sq(x) = x * x\nfunction h(n)\n s = 0\n for i = 1:n\n  s = s + sq(i)\n end\n s\nend\nh(3)\n",
                    inline_budget=0)
    spec = _spec(ctx, "h", 0, "Int64")
    assert any(isinstance(getattr(s, "expr", None), Invoke) for s in spec.code.body)


def test_recursion_is_not_inlined():
    _, _, ctx = run("fib(n) = n < 2 ? n : fib(n-1) + fib(n-2)\nfib(10)\n")
    spec = _spec(ctx, "fib", 0, "Int64")
    invokes = [s.expr for s in spec.code.body if isinstance(getattr(s, "expr", None), Invoke)]
    assert any(e.method is spec.method for e in invokes)


def test_constant_applicable_branches_pruned():
    _, _, ctx = run("promote_type(Int32, Float64)\n")
    assert ctx.stats["pruned_branches"] > 0


def test_stages_recorded():
    _, _, ctx = run("sq(x) = x * x\nsq(2)\n")
    spec = _spec(ctx, "sq", 0, "Int64")
    for p in PASSES:
        assert p in spec.stages


def test_pass_subset():
    out, _, ctx = run("println(1 + 2.5)\n", passes={"devirtualize"})
    assert out == "3.5\n"
    assert ctx.stats["inlined_calls"] == 0
    assert ctx.stats["devirtualized_calls"] > 0


def test_errors_preserved_after_inlining():
    from minijl.values import MiniError
    with pytest.raises(MiniError, match="BoundsError"):
        run("k(t) = t[3]\nk((1, 2))\n")
