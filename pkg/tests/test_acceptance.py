"""Acceptance criteria 1-12; one PASS/FAIL line per criterion is printed at the end of the run."""

import functools
import io
import itertools
import random
import sys
import time

from minijl.cli import run as cli_run
from minijl.ir import Return, Var
from minijl.lattice import intersect, morespecific, subtype, union
from minijl.optimize import dynamic_call_sites, tuple_sites
from minijl.runtime import Specialization
from minijl.types import TupleType, TypeVar, show
from conftest import PROGRAMS, fresh_ctx, run
from termgen import concrete_universe, corpus, to_type

RESULTS: dict = {}
STATS_LINES: list = []


def criterion(n: int, title: str):
    def deco(fn):
        @functools.wraps(fn)
        def wrapper(*a, **kw):
            try:
                fn(*a, **kw)
            except BaseException:
                RESULTS[n] = (False, title)
                raise
            RESULTS[n] = (True, title)
        return wrapper
    return deco


def report_lines() -> list:
    out = []
    for n in range(1, 13):
        ok, title = RESULTS.get(n, (None, ""))
        status = "PASS" if ok else ("FAIL" if ok is False else "NOT RUN")
        out.append(f"criterion {n:2d}: {status}  {title}")
    out.extend("    " + ln for ln in STATS_LINES)
    return out


@criterion(1, "lattice laws over a generated corpus")
def test_c01_lattice_laws():
    t0 = time.time()
    ctx = fresh_ctx()
    terms = [to_type(ctx, s) for s in corpus(520)]
    universe = [to_type(ctx, s) for s in concrete_universe()]
    assert len(terms) >= 500
    rng = random.Random(11)
    bad = [show(a) for a in terms if not subtype(a, a)]
    for _ in range(20000):
        a, b, c = rng.choice(terms), rng.choice(terms), rng.choice(terms)
        if subtype(a, b) and subtype(b, c) and not subtype(a, c):
            bad.append(("trans", show(a), show(b), show(c)))
    for _ in range(3000):
        a, b = rng.choice(terms), rng.choice(terms)
        u = union(a, b)
        if not (subtype(a, u) and subtype(b, u)):
            bad.append(("union", show(a), show(b)))
    for _ in range(600):
        a, b = rng.choice(terms), rng.choice(terms)
        i = intersect(a, b)
        for c in universe:
            if subtype(c, a) and subtype(c, b) and not subtype(c, i):
                bad.append(("intersect", show(a), show(b), show(c)))
    assert bad == []
    assert time.time() - t0 < 30


@criterion(2, "point checks for subtype, intersect, morespecific")
def test_c02_point_checks():
    ctx = fresh_ctx()
    T = functools.partial(to_type, ctx)
    assert subtype(T("(String,Int64,Int64)"), T("(String,Int64...)")) is True
    assert subtype(T("Array{Int64,1}"), T("Array{Number,1}")) is False
    assert intersect(T("Union(Int32,String)"), T("Number")) is T("Int32")
    assert morespecific(T("(Int32...)"), T("(Number,Number)")) is True
    assert morespecific(T("(Number,Number)"), T("(Int32...)")) is False
    t, x, y = TypeVar("T"), TypeVar("X"), TypeVar("Y")
    assert morespecific(TupleType((t, t)), TupleType((x, y))) is True


@criterion(3, "ambiguity warning golden text")
def test_c03_ambiguity_warning():
    _, diag, _ = run("foo(x::Int64, y) = 1\nfoo(x, y::Int64) = 2\n")
    assert diag == ("Warning: New definition foo(Any,Int64) is ambiguous with foo(Int64,Any). "
                    "Make sure foo(Int64,Int64) is defined first.\n")


@criterion(4, "cached dispatch equals slow-path scan, heuristics on and off")
def test_c04_dispatch_oracle():
    checks = 0
    for p in PROGRAMS:
        src = p.read_text()
        outs = []
        for h in (True, False):
            out, diag, ctx = run(src, heuristics=h, optimize=False, dispatch_oracle=True)
            assert ctx.oracle_mismatches == [], (p.name, h)
            checks += ctx.stats["oracle_checks"]
            outs.append((out, diag))
        assert outs[0] == outs[1], p.name
    assert checks >= 2000


@criterion(5, "variadic table with dummy entries, arg count <= 6")
def test_c05_dummy_entries():
    src = "v(xs...) = 1\nv(x::Int64, ys...) = 2\nv(x::Number, y::Int64, zs...) = 3\n"
    results = []
    for h in (True, False):
        ctx = fresh_ctx(heuristics=h, dispatch_oracle=True)
        ctx.eval_source(src)
        gf = ctx.globals["v"]
        vals = [1, 2.5, "s", ctx.eval_source("int32(1)")]
        calls = [c for n in range(7) for c in itertools.product(range(len(vals)), repeat=n)]
        random.Random(5).shuffle(calls)
        results.append({c: ctx.dispatch(gf, [vals[i] for i in c]) for c in calls})
        assert ctx.oracle_mismatches == []
    assert results[0] == results[1]


@criterion(6, "inference soundness oracle reports zero violations")
def test_c06_soundness():
    for p in PROGRAMS:
        for opt in (True, False):
            _, _, ctx = run(p.read_text(), check_inference=True, optimize=opt)
            assert ctx.violations == [], (p.name, ctx.violations[:2])


@criterion(7, "inference point results and fixpoint")
def test_c07_inference_points():
    ctx = fresh_ctx()
    ctx.eval_source("fib(n) = n < 2 ? n : fib(n-1) + fib(n-2)\n"
                    "f(x) = x > 0 ? x : \"negative\"\n"
                    "iseven(n) = n == 0 ? true : isodd(n - 1)\n"
                    "isodd(n) = n == 0 ? false : iseven(n - 1)\n"
                    "tyof(x) = typeof(x)\n")

    def inf(name, arg):
        a = TupleType((to_type(ctx, arg),))
        return show(ctx.inferencer.infer_generic(ctx.globals[name], a))

    assert inf("fib", "Int64") == "Int64"
    assert inf("f", "Int64") == "Union(Int64,String)"
    assert inf("iseven", "Int64") == "Bool" and inf("isodd", "Int64") == "Bool"
    assert inf("tyof", "Number") == "Type{T<:Number}"
    for name in ("fib", "iseven", "isodd", "f"):
        m = ctx.globals[name].methods[0]
        spec = Specialization(m, TupleType((to_type(ctx, "Int64"),)), m.code)
        ctx.inferencer.annotate(spec)
    assert ctx.stats["inference_unstable"] == 0


@criterion(8, "promotion results; fallback leaves no dispatch or tuple")
def test_c08_promotion():
    out, _, ctx = run("println(promote_type(Complex128, Float64))\n"
                      "println(promote_type(Float64, Complex128))\n"
                      "x = 1 + 2.5\nprintln(x, \" \", typeof(x))\n")
    assert out == "Complex128\nComplex128\n3.5 Float64\n"
    gf = ctx.globals["+"]
    specs = [s for m in gf.methods if repr(m) == "+(Number,Number)"
             for w, s in m.specs.items() if show(w) == "(Int64, Float64)"]
    assert len(specs) == 1
    assert dynamic_call_sites(ctx, specs[0].code) == 0
    assert tuple_sites(ctx, specs[0].code) == 0
    before = (ctx.stats["dynamic_dispatches"], ctx.stats["tuple_allocations"])
    ctx.invoke(specs[0], [1, 2.5])
    assert (ctx.stats["dynamic_dispatches"], ctx.stats["tuple_allocations"]) == before


@criterion(9, "staged promote_shape generates return s2, once per type pair")
def test_c09_staged():
    out, _, ctx = run("println(promote_shape((1,2),(1,2,3)))\n"
                      "println(promote_shape((4,5),(6,7,8)))\n")
    assert out == "(1,2,3)\n(6,7,8)\n"
    (m,) = ctx.globals["promote_shape"].methods
    assert ctx.stats["staged_expansions"] == 1
    (gm,) = m.expansions.values()
    assert gm.code.body[0] == Return(Var("s2"))
    (spec,) = gm.specs.values()
    assert show(spec.rettype) == "(Int64, Int64, Int64)"


@criterion(10, "typemax(Int64)")
def test_c10_typemax():
    ctx = fresh_ctx()
    assert ctx.eval_source("typemax(Int64)") == 9223372036854775807


@criterion(11, "passes preserve output; fib and pi_sum loops dispatch-free")
def test_c11_optimization():
    for p in PROGRAMS:
        on = run(p.read_text())
        off = run(p.read_text(), optimize=False)
        assert on[:2] == off[:2], p.name
    for name in ("fib.jl", "pi_sum.jl"):
        (p,) = [q for q in PROGRAMS if q.name == name]
        _, _, ctx = run(p.read_text())
        assert ctx.stats["dynamic_dispatches"] == 0, name


@criterion(12, "stats report with compiled-expression counts and typed fractions")
def test_c12_stats_report():
    lines = []
    for p in PROGRAMS:
        out, diag = io.StringIO(), io.StringIO()
        assert cli_run(["run", "--stats", str(p)], out, diag) == 0
        kv = dict(ln.split("=", 1) for ln in diag.getvalue().splitlines() if "=" in ln
                  and not ln.startswith("Warning"))
        n, typed, conc = int(kv["expressions"]), int(kv["typed"]), int(kv["concrete"])
        assert 0 <= conc <= typed <= n
        lines.append(f"{p.name}: {n} expressions, {typed} ({kv['typed_pct']}%) more specific "
                     f"than Any, {conc} ({kv['concrete_pct']}%) concrete")
    STATS_LINES[:] = lines


if __name__ == "__main__":
    sys.setrecursionlimit(20000)
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except Exception:
                pass
    print("\n".join(report_lines()))
