"""Run-time values and their type tags.

Int64, Float64, Bool and String values are plain Python ``int``, ``float``,
``bool`` and ``str``. Other bits types use ``Bits``. Tuples are Python tuples,
and a tuple of types doubles as a tuple type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .types import (Apply, Kind, TupleType, TypeTerm, Vararg, has_vars, show)


class MiniError(Exception):
    """An error raised by the running program (the ``error`` builtin and friends)."""


@dataclass(frozen=True)
class Bits:
    type: Apply
    val: object

    def __repr__(self) -> str:
        return f"{self.val}"


@dataclass(eq=False)
class Struct:
    type: Apply
    fields: tuple

    def __repr__(self) -> str:
        return show_value(self)


class _Nothing:
    __slots__ = ()

    def __repr__(self) -> str:
        return "nothing"


NOTHING = _Nothing()


@dataclass(eq=False)
class Builtin:
    name: str
    fn: object
    # the callee gets the runtime context as first argument
    wants_ctx: bool = False

    def __repr__(self) -> str:
        return self.name


@dataclass(eq=False)
class Closure:
    code: object
    env: dict = field(default_factory=dict)

    @property
    def name(self) -> str:
        return self.code.name

    def __repr__(self) -> str:
        return f"({self.code.name})"


@dataclass(eq=False)
class CodeValue:
    """A quoted fragment; the result of ``quote ... end``."""

    source: str
    ast: object = None

    def __repr__(self) -> str:
        return f"quote {self.source} end"


class Types:
    """Handles to the core families used for literal tags."""

    def __init__(self, reg):
        self.reg = reg
        self.refresh()

    def refresh(self):
        get = self._get
        self.Int64 = get("Int64")
        self.Float64 = get("Float64")
        self.Bool = get("Bool")
        self.String = get("String")
        self.Function = get("Function")
        self.Nothing = get("Nothing")
        self.Expr = get("Expr")

    def _get(self, name):
        tn = self.reg.names.get(name)
        return self.reg.consed(Apply(tn)) if tn is not None and not tn.formals else None


def typeof_value(v, tys: Types) -> TypeTerm:
    if v is True or v is False:
        return tys.Bool
    if isinstance(v, int):
        return tys.Int64
    if isinstance(v, float):
        return tys.Float64
    if isinstance(v, str):
        return tys.String
    if isinstance(v, (Bits, Struct)):
        return v.type
    if isinstance(v, tuple):
        return tys.reg.consed(TupleType(tuple(typeof_value(x, tys) for x in v)))
    if isinstance(v, TypeTerm):
        k = Kind(v)
        return tys.reg.consed(k) if not has_vars(v) and not isinstance(v, Vararg) else k
    if v is NOTHING:
        return tys.Nothing
    if isinstance(v, CodeValue):
        return tys.Expr
    # generic functions, closures, builtins
    return tys.Function


def is_same(a, b) -> bool:
    """The ``is`` builtin: identity, with immutable bits compared by value."""
    if a is b:
        return True
    if isinstance(a, bool) or isinstance(b, bool):
        return False
    if type(a) is not type(b):
        return False
    if isinstance(a, (int, float, str, Bits)):
        return a == b
    if isinstance(a, tuple):
        return len(a) == len(b) and all(is_same(x, y) for x, y in zip(a, b))
    if isinstance(a, TypeTerm):
        from .lattice import type_equal
        return a == b or type_equal(a, b)
    return False


def show_float(x: float) -> str:
    if x != x:
        return "NaN"
    if x in (float("inf"), float("-inf")):
        return "Inf" if x > 0 else "-Inf"
    r = repr(x)
    if "e" in r:
        m, e = r.split("e")
        if "." not in m:
            m += ".0"
        return f"{m}e{int(e)}"
    return r


def show_value(v) -> str:
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, float):
        return show_float(v)
    if isinstance(v, (int, str)):
        return str(v)
    if isinstance(v, Bits):
        return show_float(v.val) if isinstance(v.val, float) else str(v.val)
    if isinstance(v, tuple):
        if len(v) == 1:
            return f"({show_value(v[0])},)"
        return "(" + ",".join(show_value(x) for x in v) + ")"
    if isinstance(v, Struct):
        return f"{show(v.type)}(" + ",".join(show_value(x) for x in v.fields) + ")"
    if isinstance(v, TypeTerm):
        return show(v)
    return repr(v)


def repr_value(v) -> str:
    """REPL display: strings are quoted."""
    if isinstance(v, str) and v is not True and v is not False:
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    return show_value(v)
