import math
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import fresh_ctx, run
from minijl.values import MiniError

INT64_MAX = 2**63 - 1


def wrap64(v):
    v &= 2**64 - 1
    return v - 2**64 if v >= 2**63 else v


@pytest.fixture(scope="module")
def ctx():
    return fresh_ctx()


def ev(ctx, src):
    return ctx.eval_source(src)


def test_typemax(ctx):
    assert ev(ctx, "typemax(Int64)") == INT64_MAX
    assert ev(ctx, "typemin(Int64)") == -2**63


def test_overflow_wraps(ctx):
    assert ev(ctx, "typemax(Int64) + 1") == -2**63


def test_int32_arithmetic_stays_int32(ctx):
    out, _, _ = run("println(typeof(int32(3) * int32(4)), \" \", int32(3) * int32(4))\n")
    assert out == "Int32 12\n"


def test_promotion_table():
    out, _, _ = run("println(promote_type(Complex128, Float64), promote_type(Float64, Complex128),"
                    " promote_type(Int32, Int64), promote_type(Int64, Float64),"
                    " promote_type(Rational{Int64}, Float64))\n")
    assert out == "Complex128Complex128Int64Float64Float64\n"


def test_mixed_add_is_float(ctx):
    assert ev(ctx, "1 + 2.5") == 3.5
    assert ev(ctx, "typeof(1 + 2.5)") is ev(ctx, "Float64")


def test_rational_normalizes(ctx):
    r = ev(ctx, "Rational(4, 6)")
    assert (r.fields[0], r.fields[1]) == (2, 3)
    r = ev(ctx, "Rational(3, -6)")
    assert (r.fields[0], r.fields[1]) == (-1, 2)


def test_division_by_zero_is_error(ctx):
    with pytest.raises(MiniError):
        ev(ctx, "div(1, 0)")


def test_float_division(ctx):
    assert ev(ctx, "7 / 2") == 3.5
    assert ev(ctx, "1.0 / 0.0") == math.inf


def test_staged_promote_shape(ctx):
    assert ev(ctx, "promote_shape((1, 2), (3, 4, 5))") == (3, 4, 5)
    assert ev(ctx, "promote_shape((1, 2, 3), (4,))") == (1, 2, 3)


def test_ranges_and_iteration(ctx):
    assert ev(ctx, "length(2:7)") == 6
    out, _, _ = run("s = 0\nfor i = 3:6\n s = s + i\nend\nprintln(s)\n")
    assert out == "18\n"


def test_string_ops(ctx):
    assert ev(ctx, '"ab" * "cd"') == "abcd"
    assert ev(ctx, 'length("hello")') == 5


_ints = st.integers(min_value=-10**6, max_value=10**6)


@settings(max_examples=60, deadline=None)
@given(_ints, _ints.filter(lambda x: x != 0), _ints, _ints.filter(lambda x: x != 0))
def test_prop_rational_arithmetic_matches_fraction(ctx, a, b, c, d):
    for op in "+-*":
        r = ev(ctx, f"({a}//{b}) {op} ({c}//{d})")
        want = eval(f"Fraction({a},{b}) {op} Fraction({c},{d})")
        assert Fraction(r.fields[0], r.fields[1]) == want
        assert r.fields[1] > 0


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=-2**63, max_value=2**63 - 1), st.integers(min_value=-2**63, max_value=2**63 - 1))
def test_prop_int64_wraps_like_twos_complement(ctx, a, b):
    assert ev(ctx, f"{a} + {b}") == wrap64(a + b)
    assert ev(ctx, f"{a} * {b}") == wrap64(a * b)
    assert ev(ctx, f"{a} - {b}") == wrap64(a - b)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=-10**9, max_value=10**9), st.integers(min_value=-10**9, max_value=10**9).filter(bool))
def test_prop_div_rem_truncate(ctx, a, b):
    q = ev(ctx, f"div({a}, {b})")
    r = ev(ctx, f"rem({a}, {b})")
    assert q == int(a / b) if abs(a) < 2**52 else True
    assert q * b + r == a
    assert abs(r) < abs(b)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=-1000, max_value=1000), st.floats(min_value=-1e6, max_value=1e6))
def test_prop_mixed_promotion_matches_python(ctx, i, x):
    assert ev(ctx, f"{i} + {x!r}") == i + x
    assert ev(ctx, f"{x!r} * {i}") == x * i


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=-20, max_value=20), st.integers(min_value=0, max_value=20))
def test_prop_integer_power(ctx, a, p):
    assert ev(ctx, f"({a}) ^ {p}") == wrap64(a ** p)
