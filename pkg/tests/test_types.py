from minijl.types import (AnyType, Bottom, Kind, TupleType, TypeVar, Vararg, free_vars,
                          has_vars, is_concrete, rename_vars, show, substitute, type_as_value)


def test_interning_is_structural(boot_ctx, T):
    reg = boot_ctx.reg
    a, b = T("(Int64,Rational{Int32})"), T("(Int64,Rational{Int32})")
    assert reg.intern(a) == reg.intern(b)
    assert reg.consed(a) is reg.consed(b)
    assert reg.intern(T("(Int64,Int32)")) != reg.intern(T("(Int32,Int64)"))


def test_intern_ids_are_small_and_stable(boot_ctx, T):
    reg = boot_ctx.reg
    i = reg.intern(T("Complex128"))
    assert reg.by_id(i) is reg.consed(T("Complex128"))
    assert reg.intern(T("Complex128")) == i


def test_apply_same_params_gives_same_object(boot_ctx, T):
    assert T("Rational{Int64}") is T("Rational{Int64}")


def test_show_notation(T):
    assert show(T("(String,Int64...)")) == "(String, Int64...)"
    assert show(T("Union(Int32,String)")) == "Union(Int32,String)"
    assert show(T("Type{Int64}")) == "Type{Int64}"
    assert show(T("Array{Int64,1}")) == "Array{Int64,1}"


def test_concreteness(T):
    assert is_concrete(T("Int64"))
    assert is_concrete(T("(Int64,Float64)"))
    assert not is_concrete(T("Number"))
    assert not is_concrete(T("(Int64...)"))
    assert not is_concrete(T("Union(Int64,String)"))
    assert not is_concrete(T("Rational"))


def test_vars_identity_not_name():
    a, b = TypeVar("T"), TypeVar("T")
    assert a is not b
    t = TupleType((a, b))
    assert len(free_vars(t)) == 2
    assert substitute(t, {a: AnyType}) == TupleType((AnyType, b))


def test_rename_vars_is_fresh():
    v = TypeVar("S")
    t = TupleType((v, Vararg(v)))
    r, _ = rename_vars(t)
    assert has_vars(r)
    assert not any(x is v for x in free_vars(r))


def test_tuple_types_are_tuples_at_run_time(T):
    assert type_as_value(T("(Int64,Float64)")) == (T("Int64"), T("Float64"))
    assert type_as_value(T("Int64")) is T("Int64")


def test_kind_and_bottom_show():
    assert show(Bottom) == "None"
    assert isinstance(Kind(AnyType), Kind)
