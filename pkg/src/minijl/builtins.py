"""Built-in functions and bits-type intrinsics (run-time implementations).

Each entry takes the runtime context first. Type transfer functions for the
same names live in ``infer.TRANSFER``.
"""

from __future__ import annotations

import math

from .lattice import DataType, subtype, union_all
from .types import (Apply, BITS, COMPOSITE, Kind, TupleType, TypeError_, TypeTerm,
                    Vararg, as_type, is_type_value, show, type_as_value)
from .values import (NOTHING, Bits, CodeValue, MiniError, Struct, is_same,
                     show_value, typeof_value)

BUILTINS: dict = {}


def builtin(name=None):
    def deco(fn):
        BUILTINS[name or fn.__name__.rstrip("_")] = fn
        return fn
    return deco


# ---------------------------------------------------------------- object model

@builtin("is")
def is_(ctx, a, b):
    return is_same(a, b)


@builtin()
def typeof(ctx, x):
    return type_as_value(ctx.typeof(x))


@builtin()
def isa(ctx, x, t):
    return subtype(ctx.typeof(x), _type_arg(t))


@builtin()
def issubtype(ctx, a, b):
    return subtype(_type_arg(a), _type_arg(b))


@builtin("<:")
def issubtype_op(ctx, a, b):
    return subtype(_type_arg(a), _type_arg(b))


@builtin()
def typeassert(ctx, x, t):
    tt = _type_arg(t)
    if not subtype(ctx.typeof(x), tt):
        raise MiniError(f"type assertion failed: expected {show(tt)}, got "
                        f"{show(ctx.typeof(x))}")
    return x


@builtin()
def tuple_(ctx, *xs):
    ctx.stats["tuple_allocations"] += 1
    return tuple(xs)


@builtin()
def tupleref(ctx, t, i):
    if not isinstance(t, tuple):
        raise MiniError(f"tupleref: expected a tuple, got {show(ctx.typeof(t))}")
    if not isinstance(i, int) or isinstance(i, bool) or not 1 <= i <= len(t):
        raise MiniError(f"BoundsError: index {show_value(i)} of tuple of length {len(t)}")
    return t[i - 1]


@builtin()
def tuplelen(ctx, t):
    if not isinstance(t, tuple):
        raise MiniError(f"tuplelen: expected a tuple, got {show(ctx.typeof(t))}")
    return len(t)


@builtin()
def getfield(ctx, x, f):
    if not isinstance(x, Struct):
        raise MiniError(f"type {show(ctx.typeof(x))} has no fields")
    names = x.type.name.field_names
    if isinstance(f, str):
        if f not in names:
            raise MiniError(f"type {x.type.name.name} has no field {f}")
        return x.fields[names.index(f)]
    if isinstance(f, int) and not isinstance(f, bool) and 1 <= f <= len(names):
        return x.fields[f - 1]
    raise MiniError(f"invalid field reference {show_value(f)}")


@builtin()
def nfields(ctx, x):
    return len(x.fields) if isinstance(x, Struct) else 0


@builtin()
def apply_type(ctx, base, *params):
    if base is DataType or base == DataType:
        if len(params) != 1:
            raise MiniError("Type{...} takes exactly one parameter")
        return Kind(_type_arg(params[0]))
    b = _type_arg(base)
    if not isinstance(b, Apply):
        raise MiniError(f"cannot apply parameters to {show(b)}")
    ps = [p if isinstance(p, (int, bool)) else _type_arg(p) for p in params]
    try:
        return ctx.reg.apply(b.name, tuple(b.params) + tuple(ps))
    except TypeError_ as e:
        raise MiniError(str(e)) from None


@builtin("Union")
def union_(ctx, *ts):
    return type_as_value(union_all(_type_arg(t) for t in ts))


@builtin()
def applicable(ctx, f, *args):
    gf = ctx.callable_gf(f)
    if gf is None:
        return False
    argt = ctx.argtuple(args)
    m, _ = gf.slow_lookup(argt)
    return m is not None


@builtin()
def error(ctx, *msg):
    raise MiniError("".join(x if isinstance(x, str) else show_value(x) for x in msg))


@builtin()
def string(ctx, *xs):
    return "".join(x if isinstance(x, str) else show_value(x) for x in xs)


@builtin()
def print_(ctx, *xs):
    ctx.out.write("".join(x if isinstance(x, str) else show_value(x) for x in xs))
    return NOTHING


@builtin()
def println(ctx, *xs):
    ctx.out.write("".join(x if isinstance(x, str) else show_value(x) for x in xs) + "\n")
    return NOTHING


@builtin()
def eval_code(ctx, q):
    if not isinstance(q, CodeValue):
        raise MiniError("eval_code: expected quoted code")
    return ctx.eval_source(q.source)


def _type_arg(t) -> TypeTerm:
    if is_type_value(t):
        return as_type(t)
    raise MiniError(f"expected a type, got {show_value(t)}")


# ---------------------------------------------------------------- bits intrinsics

def _nbits(ctx, x) -> int:
    if isinstance(x, bool):
        return 8
    if isinstance(x, int):
        return 64
    if isinstance(x, Bits):
        return x.type.name.nbits
    raise MiniError(f"intrinsic: expected an integer, got {show(ctx.typeof(x))}")


def _ival(ctx, x) -> int:
    if isinstance(x, bool):
        return int(x)
    if isinstance(x, int):
        return x
    if isinstance(x, Bits) and isinstance(x.val, int):
        return x.val
    raise MiniError(f"intrinsic: expected an integer, got {show(ctx.typeof(x))}")


def _fval(ctx, x) -> float:
    if isinstance(x, float):
        return x
    if isinstance(x, Bits) and isinstance(x.val, float):
        return x.val
    raise MiniError(f"intrinsic: expected a float, got {show(ctx.typeof(x))}")


def wrap(v: int, nbits: int) -> int:
    m = 1 << nbits
    v &= m - 1
    return v - m if v >= m >> 1 else v


def _int_like(ctx, proto, v: int):
    if isinstance(proto, int) and not isinstance(proto, bool):
        return wrap(v, 64)
    if isinstance(proto, Bits):
        return Bits(proto.type, wrap(v, proto.type.name.nbits))
    raise MiniError("intrinsic: bad integer operand")


def _make_int(ctx, t, v: int):
    t = _type_arg(t)
    if t is ctx.tys.Int64:
        return wrap(v, 64)
    if isinstance(t, Apply) and t.name.kind == BITS:
        return Bits(t, wrap(v, t.name.nbits))
    raise MiniError(f"intrinsic: {show(t)} is not a bits type")


def _same_int(ctx, a, b):
    if ctx.typeof(a) is not ctx.typeof(b):
        raise MiniError("intrinsic: operand types differ")


def _binop_int(name, op):
    def fn(ctx, a, b):
        _same_int(ctx, a, b)
        return _int_like(ctx, a, op(_ival(ctx, a), _ival(ctx, b)))
    BUILTINS[name] = fn


def _cmp_int(name, op):
    def fn(ctx, a, b):
        _same_int(ctx, a, b)
        return op(_ival(ctx, a), _ival(ctx, b))
    BUILTINS[name] = fn


def _sdiv(a, b):
    if b == 0:
        raise MiniError("integer division error")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def _srem(a, b):
    if b == 0:
        raise MiniError("integer division error")
    return a - b * _sdiv(a, b)


_binop_int("add_int", lambda a, b: a + b)
_binop_int("sub_int", lambda a, b: a - b)
_binop_int("mul_int", lambda a, b: a * b)
_binop_int("sdiv_int", _sdiv)
_binop_int("srem_int", _srem)
_binop_int("and_int", lambda a, b: a & b)
_binop_int("or_int", lambda a, b: a | b)
_binop_int("xor_int", lambda a, b: a ^ b)
_cmp_int("eq_int", lambda a, b: a == b)
_cmp_int("slt_int", lambda a, b: a < b)
_cmp_int("sle_int", lambda a, b: a <= b)


@builtin()
def neg_int(ctx, a):
    return _int_like(ctx, a, -_ival(ctx, a))


@builtin()
def shl_int(ctx, a, n):
    return _int_like(ctx, a, _ival(ctx, a) << _ival(ctx, n))


@builtin()
def ashr_int(ctx, a, n):
    return _int_like(ctx, a, _ival(ctx, a) >> _ival(ctx, n))


def _binop_float(name, op):
    def fn(ctx, a, b):
        return float(op(_fval(ctx, a), _fval(ctx, b)))
    BUILTINS[name] = fn


def _fdiv(a, b):
    if b == 0.0:
        if a == 0.0 or a != a:
            return math.nan
        return math.copysign(math.inf, a) * math.copysign(1.0, b)
    return a / b


def _fpow(a, b):
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError):
        return math.nan if a < 0 else math.inf


_binop_float("add_float", lambda a, b: a + b)
_binop_float("sub_float", lambda a, b: a - b)
_binop_float("mul_float", lambda a, b: a * b)
_binop_float("div_float", _fdiv)
_binop_float("pow_float", _fpow)


def _cmp_float(name, op):
    def fn(ctx, a, b):
        return op(_fval(ctx, a), _fval(ctx, b))
    BUILTINS[name] = fn


_cmp_float("eq_float", lambda a, b: a == b)
_cmp_float("lt_float", lambda a, b: a < b)
_cmp_float("le_float", lambda a, b: a <= b)


@builtin()
def neg_float(ctx, a):
    return -_fval(ctx, a)


@builtin()
def sqrt_float(ctx, a):
    v = _fval(ctx, a)
    return math.sqrt(v) if v >= 0 else math.nan


@builtin()
def floor_float(ctx, a):
    return float(math.floor(_fval(ctx, a)))


@builtin()
def sitofp(ctx, t, a):
    if _type_arg(t) is not ctx.tys.Float64:
        raise MiniError("sitofp: only Float64 is supported")
    return float(_ival(ctx, a))


@builtin()
def fptosi(ctx, t, a):
    v = _fval(ctx, a)
    if v != v or v in (math.inf, -math.inf):
        raise MiniError("InexactError")
    return _make_int(ctx, t, int(v))


@builtin()
def trunc_int(ctx, t, a):
    return _make_int(ctx, t, _ival(ctx, a))


@builtin()
def sext_int(ctx, t, a):
    return _make_int(ctx, t, _ival(ctx, a))


@builtin()
def not_bool(ctx, a):
    if a is not True and a is not False:
        raise MiniError(f"not_bool: expected Bool, got {show(ctx.typeof(a))}")
    return not a


@builtin()
def string_concat(ctx, a, b):
    return a + b


@builtin()
def string_length(ctx, a):
    return len(a)
