import pytest

from minijl.lattice import subtype
from minijl.runtime import Specialization
from minijl.types import AnyType, TupleType, show
from conftest import PROGRAMS, fresh_ctx, run
from termgen import to_type

DEFS = """\
fib(n) = n < 2 ? n : fib(n-1) + fib(n-2)
f(x) = x > 0 ? x : "negative"
iseven(n) = n == 0 ? true : isodd(n - 1)
isodd(n) = n == 0 ? false : iseven(n - 1)
tyof(x) = typeof(x)
"""


@pytest.fixture(scope="module")
def ctx():
    c = fresh_ctx()
    c.eval_source(DEFS)
    return c


def infer(ctx, name, *argtypes):
    gf = ctx.globals[name]
    return show(ctx.inferencer.infer_generic(gf, TupleType(tuple(to_type(ctx, a) for a in argtypes))))


def test_fib_is_int(ctx):
    assert infer(ctx, "fib", "Int64") == "Int64"


def test_conditional_union(ctx):
    assert infer(ctx, "f", "Int64") == "Union(Int64,String)"


def test_mutual_recursion(ctx):
    assert infer(ctx, "iseven", "Int64") == "Bool"
    assert infer(ctx, "isodd", "Int64") == "Bool"


def test_typeof_abstract(ctx):
    assert infer(ctx, "tyof", "Number") == "Type{T<:Number}"
    assert infer(ctx, "tyof", "Int64") == "Type{Int64}"


def test_promotion_results(ctx):
    assert infer(ctx, "+", "Int64", "Float64") == "Float64"
    assert infer(ctx, "promote_type", "Type{Complex128}", "Type{Float64}") == "Type{Complex128}"
    assert infer(ctx, "promote_shape", "(Int64,Int64)", "(Int64,Int64,Int64)") == "(Int64, Int64, Int64)"


def test_abstract_arguments_give_any(ctx):
    assert infer(ctx, "+", "Number", "Number") == "Any"


def test_final_pass_is_a_fixpoint(ctx):
    for name, args in [("fib", ["Int64"]), ("iseven", ["Int64"]), ("f", ["Int64"])]:
        m = ctx.globals[name].methods[0]
        spec = Specialization(m, TupleType(tuple(to_type(ctx, a) for a in args)), m.code)
        ctx.inferencer.annotate(spec)
        before = spec.rettype
        ctx.inferencer.annotate(spec)
        assert spec.rettype == before
    assert ctx.stats["inference_unstable"] == 0


def test_statement_annotations_cover_body(ctx):
    m = ctx.globals["fib"].methods[0]
    spec = Specialization(m, TupleType((to_type(ctx, "Int64"),)), m.code)
    ctx.inferencer.annotate(spec)
    assert spec.types
    assert all(not subtype(AnyType, t) for t in spec.types.values())


def test_union_cutoff_widens_to_any():
    src = ("g(x) = x == 1 ? 1 : x == 2 ? 2.5 : x == 3 ? \"s\" : x == 4 ? int32(1) : "
           "x == 5 ? (1,) : nothing\n")
    for cutoff, expect in [(8, False), (2, True)]:
        c = fresh_ctx(union_cutoff=cutoff)
        c.eval_source(src)
        r = c.inferencer.infer_generic(c.globals["g"], TupleType((to_type(c, "Int64"),)))
        assert (r is AnyType) == expect, show(r)


def test_tuple_growth_is_capped():
    c = fresh_ctx(tuple_depth=2)
    c.eval_source("nest(x, n) = n == 0 ? x : nest((x,), n - 1)\n")
    r = c.inferencer.infer_generic(c.globals["nest"], TupleType((to_type(c, "Int64"), to_type(c, "Int64"))))
    assert r is not None


def test_maybe_undefined_read_is_recorded():
    c = fresh_ctx()
    c.eval_source("function u(b)\n if b\n  y = 1\n end\n y\nend\n")
    m = c.globals["u"].methods[0]
    spec = Specialization(m, TupleType((to_type(c, "Bool"),)), m.code)
    c.inferencer.annotate(spec)
    assert spec.undef_reads


@pytest.mark.parametrize("path", PROGRAMS, ids=lambda p: p.name)
def test_soundness_oracle(path):
    for opt in (True, False):
        out, _, ctx = run(path.read_text(), check_inference=True, optimize=opt)
        assert ctx.violations == [], ctx.violations[:3]
        assert ctx.stats["checked_values"] > 0


def test_soundness_on_boot_heavy_program():
    src = "\n".join(["println(1//2 + 3, 2.5 * int32(2), promote(1, 1//2), 3 ^ 3, 2.0 ^ 3)",
                     "println(complex128(1.0) * 2, abs(-3), one(2.5), zero(1), iszero(0))"])
    out, _, ctx = run(src, check_inference=True)
    assert ctx.violations == []
    assert out
