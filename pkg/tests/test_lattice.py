import random

import pytest
from hypothesis import given, settings, strategies as st

from minijl.lattice import (cap_kind, cap_tuple, intersect, join, match, morespecific, subtype,
                            type_equal, union, union_all, widen_union)
from minijl.types import AnyType, Bottom, Kind, TupleType, TypeVar, Vararg, show
from termgen import CONCRETE, LEAVES, concrete_universe, corpus, to_type


# ---------------------------------------------------------------- point checks

def test_tuple_vararg_subtype(T):
    assert subtype(T("(String,Int64,Int64)"), T("(String,Int64...)"))
    assert subtype(T("(String,)"), T("(String,Int64...)"))
    assert not subtype(T("(String,Int64,Float64)"), T("(String,Int64...)"))


def test_invariant_parameters(T):
    assert not subtype(T("Array{Int64,1}"), T("Array{Number,1}"))
    assert subtype(T("Array{Int64,1}"), T("Array"))
    assert subtype(T("Rational{Int64}"), T("Rational"))


def test_union_intersect_with_number(T):
    assert intersect(T("Union(Int32,String)"), T("Number")) is T("Int32")


def test_vararg_more_specific(T):
    assert morespecific(T("(Int32...)"), T("(Number,Number)"))
    assert not morespecific(T("(Number,Number)"), T("(Int32...)"))


def test_diagonal_more_specific():
    t = TypeVar("T")
    x, y = TypeVar("X"), TypeVar("Y")
    assert morespecific(TupleType((t, t)), TupleType((x, y)))
    assert not morespecific(TupleType((x, y)), TupleType((t, t)))


def test_fixed_beats_vararg(T):
    assert morespecific(T("(String,Int64,Int64)"), T("(String,Int64...)"))
    assert not morespecific(T("(String,Int64...)"), T("(String,Int64,Int64)"))


def test_kinds(T):
    assert subtype(T("Type{Int64}"), T("Type{Int64}"))
    assert not subtype(T("Type{Int64}"), T("Type{Number}"))
    assert intersect(T("Type{Int64}"), T("Type{Number}")) is Bottom


def test_match_binds_diagonal(T):
    t = TypeVar("T")
    sol = match(T("(Int64,Int64)"), TupleType((t, t)))
    assert sol[t] is T("Int64")
    assert match(T("(Int64,Float64)"), TupleType((t, t))) is None


def test_bounded_var_rejects_outside(T):
    t = TypeVar("T", T("Integer"))
    assert match(T("(Int32,)"), TupleType((t,))) is not None
    assert match(T("(Float64,)"), TupleType((t,))) is None


def test_union_simplifies(T):
    assert union(T("Int64"), T("Number")) is T("Number")
    assert union_all([T("Int64"), T("Int64")]) is T("Int64")
    assert show(union(T("String"), T("Int64"))) == "Union(Int64,String)"
    assert union(Bottom, T("Int64")) is T("Int64")


def test_join_cutoff(T):
    u = union_all([T(x) for x in ("Int64", "Int32", "Float64", "String", "Bool")])
    assert widen_union(u, 4) is AnyType
    assert join(T("Int64"), T("String"), 4) == union(T("Int64"), T("String"))


def test_cap_tuple_depth_and_length(T):
    deep = T("((((Int64,),),),)")
    capped = cap_tuple(deep, 2, 8)
    assert subtype(deep, capped)
    assert capped != deep
    long = TupleType(tuple(T("Int64") for _ in range(12)))
    c = cap_tuple(long, 3, 8)
    assert subtype(long, c) and c.vararg is not None


def test_cap_kind(T):
    k = Kind(Kind(Kind(T("Int64"))))
    assert subtype(k, cap_kind(k, 1))


def test_type_equal_is_mutual_subtype(T):
    assert type_equal(T("Union(Int64,String)"), T("Union(String,Int64)"))
    assert not type_equal(T("Int64"), T("Integer"))


# ---------------------------------------------------------------- generated laws

@pytest.fixture(scope="module")
def terms(boot_ctx):
    return [to_type(boot_ctx, s) for s in corpus(520)]


@pytest.fixture(scope="module")
def universe(boot_ctx):
    return [to_type(boot_ctx, s) for s in concrete_universe()]


def test_corpus_size(terms):
    assert len(terms) >= 500


def test_reflexive(terms):
    assert [show(a) for a in terms if not subtype(a, a)] == []


def test_transitive(terms):
    rng = random.Random(3)
    bad = []
    for _ in range(4000):
        a, b, c = rng.choice(terms), rng.choice(terms), rng.choice(terms)
        if subtype(a, b) and subtype(b, c) and not subtype(a, c):
            bad.append((show(a), show(b), show(c)))
    assert bad == []


def test_union_upper_bound(terms):
    rng = random.Random(4)
    for _ in range(2000):
        a, b = rng.choice(terms), rng.choice(terms)
        u = union(a, b)
        assert subtype(a, u) and subtype(b, u), (show(a), show(b), show(u))


def test_intersection_contains_common_members(terms, universe):
    rng = random.Random(5)
    for _ in range(400):
        a, b = rng.choice(terms), rng.choice(terms)
        i = intersect(a, b)
        for c in universe:
            if subtype(c, a) and subtype(c, b):
                assert subtype(c, i), (show(a), show(b), show(i), show(c))


def test_intersection_is_exact_on_universe(terms, universe):
    rng = random.Random(6)
    for _ in range(200):
        a, b = rng.choice(terms), rng.choice(terms)
        i = intersect(a, b)
        for c in universe:
            if subtype(c, i):
                assert subtype(c, a) and subtype(c, b), (show(a), show(b), show(i), show(c))


# ---------------------------------------------------------------- hypothesis

def _leaf():
    return st.sampled_from(LEAVES)


type_text = st.recursive(
    _leaf(),
    lambda inner: st.one_of(
        st.lists(inner, min_size=0, max_size=3).map(
            lambda xs: "(" + ",".join(xs) + ("," if len(xs) == 1 else "") + ")"),
        st.lists(inner, min_size=1, max_size=3).map(lambda xs: "(" + ",".join(xs) + "...)"),
        st.lists(inner, min_size=2, max_size=3).map(lambda xs: "Union(" + ",".join(xs) + ")"),
    ),
    max_leaves=6,
)


@settings(max_examples=200, deadline=None)
@given(type_text, type_text)
def test_prop_union_and_intersection_bounds(T, a, b):
    ta, tb = T(a), T(b)
    u = union(ta, tb)
    assert subtype(ta, u) and subtype(tb, u)
    i = intersect(ta, tb)
    if subtype(ta, tb):
        assert type_equal(i, ta)
    for c in CONCRETE:
        tc = T(c)
        if subtype(tc, ta) and subtype(tc, tb):
            assert subtype(tc, i)


@settings(max_examples=200, deadline=None)
@given(type_text, type_text)
def test_prop_morespecific_antisymmetric_when_distinct(T, a, b):
    ta, tb = T(a), T(b)
    if not isinstance(ta, TupleType) or not isinstance(tb, TupleType):
        return
    if morespecific(ta, tb) and morespecific(tb, ta):
        assert type_equal(ta, tb)


@settings(max_examples=150, deadline=None)
@given(type_text)
def test_prop_any_and_bottom(T, a):
    ta = T(a)
    assert subtype(ta, AnyType)
    assert subtype(Bottom, ta)
    assert intersect(ta, AnyType) is ta
    assert intersect(ta, Bottom) is Bottom


@settings(max_examples=100, deadline=None)
@given(st.lists(_leaf(), min_size=1, max_size=6))
def test_prop_vararg_tuple_accepts_homogeneous(T, xs):
    t = T("(" + ",".join(["Int64"] * len(xs)) + ",)")
    assert subtype(t, T("(Int64...)"))
    assert subtype(t, T("(Integer...)"))
    assert subtype(TupleType(()), T("(Int64...)"))
    assert isinstance(Vararg(AnyType), Vararg)
