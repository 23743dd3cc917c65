"""Type terms, type families and the hash-consing table."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator

ABSTRACT = "abstract"
COMPOSITE = "composite"
BITS = "bits"


class TypeError_(Exception):
    """Raised for malformed type declarations or applications."""


class TypeTerm:
    __slots__ = ()

    def __str__(self) -> str:
        return show(self)

    def __repr__(self) -> str:
        return show(self)


class _AnyType(TypeTerm):
    __slots__ = ()


class _BottomType(TypeTerm):
    __slots__ = ()


class _AnyMarker(TypeTerm):
    """The ANY despecialization hint. Matches like Any."""

    __slots__ = ()


AnyType = _AnyType()
Bottom = _BottomType()
ANY = _AnyMarker()

_var_ids = itertools.count()


class TypeVar(TypeTerm):
    """A type variable. Identity is allocation-unique, never the name."""

    __slots__ = ("name", "ub", "uid", "implicit")

    def __init__(self, name: str, ub: TypeTerm = AnyType, implicit: bool = False):
        self.name = name
        self.ub = ub
        self.uid = next(_var_ids)
        # stands for an omitted trailing parameter
        self.implicit = implicit

    def fresh(self) -> "TypeVar":
        return TypeVar(self.name, self.ub)


@dataclass(frozen=True, repr=False)
class Apply(TypeTerm):
    name: "TypeName"
    params: tuple = ()


@dataclass(frozen=True, repr=False)
class Vararg(TypeTerm):
    elem: TypeTerm


@dataclass(frozen=True, repr=False)
class TupleType(TypeTerm):
    elems: tuple = ()

    @property
    def vararg(self) -> TypeTerm | None:
        if self.elems and isinstance(self.elems[-1], Vararg):
            return self.elems[-1].elem
        return None

    @property
    def fixed(self) -> tuple:
        if self.vararg is not None:
            return self.elems[:-1]
        return self.elems


@dataclass(frozen=True, repr=False)
class UnionType(TypeTerm):
    members: tuple


@dataclass(frozen=True, repr=False)
class Kind(TypeTerm):
    """The singleton kind Type{T}."""

    inner: TypeTerm


class TypeName:
    """A declared type family. One instance per declaration."""

    def __init__(self, name, formals, kind, super_template, field_names=(),
                 field_types=(), nbits=0, id=0):
        self.name = name
        self.formals: tuple[TypeVar, ...] = tuple(formals)
        self.kind = kind
        self.super_template: TypeTerm = super_template
        self.field_names = tuple(field_names)
        self.field_types = tuple(field_types)
        self.nbits = nbits
        self.id = id
        # filled in by the runtime: generic function holding constructors
        self.constructors = None

    @property
    def abstract(self) -> bool:
        return self.kind == ABSTRACT

    def __repr__(self) -> str:
        return f"<TypeName {self.name}>"


TUPLE_ANY = TupleType((Vararg(AnyType),))


# ---------------------------------------------------------------- traversal

def free_vars(t, acc: list | None = None) -> list:
    """Type variables occurring in ``t``, in first-occurrence order."""
    if acc is None:
        acc = []
    if isinstance(t, TypeVar):
        if all(v is not t for v in acc):
            acc.append(t)
    elif isinstance(t, Apply):
        for p in t.params:
            free_vars(p, acc)
    elif isinstance(t, TupleType):
        for e in t.elems:
            free_vars(e, acc)
    elif isinstance(t, UnionType):
        for m in t.members:
            free_vars(m, acc)
    elif isinstance(t, (Kind, Vararg)):
        free_vars(t.inner if isinstance(t, Kind) else t.elem, acc)
    return acc


def has_vars(t) -> bool:
    if isinstance(t, TypeVar):
        return True
    if isinstance(t, Apply):
        return any(has_vars(p) for p in t.params)
    if isinstance(t, TupleType):
        return any(has_vars(e) for e in t.elems)
    if isinstance(t, UnionType):
        return any(has_vars(m) for m in t.members)
    if isinstance(t, Kind):
        return has_vars(t.inner)
    if isinstance(t, Vararg):
        return has_vars(t.elem)
    return False


def substitute(t, sub: dict):
    """Replace type variables according to ``sub`` (keyed by TypeVar)."""
    if not sub:
        return t
    if isinstance(t, TypeVar):
        return sub.get(t, t)
    if isinstance(t, Apply):
        if not t.params:
            return t
        return Apply(t.name, tuple(substitute(p, sub) for p in t.params))
    if isinstance(t, TupleType):
        return TupleType(tuple(substitute(e, sub) for e in t.elems))
    if isinstance(t, Vararg):
        return Vararg(substitute(t.elem, sub))
    if isinstance(t, UnionType):
        from .lattice import union_all
        return union_all([substitute(m, sub) for m in t.members])
    if isinstance(t, Kind):
        return Kind(substitute(t.inner, sub))
    return t


def rename_vars(t):
    """Alpha-rename every free variable of ``t`` to a fresh one."""
    vs = free_vars(t)
    if not vs:
        return t, {}
    sub: dict = {}
    for v in vs:
        nv = TypeVar(v.name, substitute(v.ub, sub))
        sub[v] = nv
    return substitute(t, sub), sub


def is_concrete(t) -> bool:
    if isinstance(t, Apply):
        n = t.name
        if n.kind == ABSTRACT or len(t.params) != len(n.formals):
            return False
        return not any(has_vars(p) for p in t.params if isinstance(p, TypeTerm))
    if isinstance(t, TupleType):
        return all(not isinstance(e, Vararg) and is_concrete(e) for e in t.elems)
    if isinstance(t, Kind):
        return not has_vars(t.inner)
    return False


def is_type_value(v) -> bool:
    """True for run-time values that denote types (tuples of types count)."""
    if isinstance(v, TypeTerm) and not isinstance(v, Vararg):
        return True
    if isinstance(v, tuple):
        return all(is_type_value(x) or isinstance(x, Vararg) for x in v)
    return False


def as_type(v) -> TypeTerm:
    """Coerce a type-denoting run-time value to a TypeTerm."""
    if isinstance(v, tuple):
        return TupleType(tuple(as_type(x) if not isinstance(x, Vararg) else x
                               for x in v))
    if isinstance(v, TypeTerm):
        return v
    raise TypeError_(f"expected a type, got {v!r}")


def type_as_value(t):
    """Tuple types are represented at run time as tuples of types."""
    if isinstance(t, TupleType) and t.vararg is None:
        return tuple(type_as_value(e) for e in t.elems)
    return t


def supertype(t):
    """The declared supertype of a nominal term, or None above Any."""
    if isinstance(t, Apply):
        n = t.name
        tmpl = n.super_template
        if n.formals:
            sub = {}
            for i, f in enumerate(n.formals):
                if i < len(t.params):
                    sub[f] = t.params[i]
            if len(sub) < len(n.formals):
                for f in n.formals[len(sub):]:
                    sub[f] = TypeVar(f.name, f.ub, implicit=True)
            tmpl = substitute(tmpl, sub)
        return tmpl
    return None


def full_params(t: Apply) -> tuple:
    """Params with omitted trailing ones filled by fresh bounded variables."""
    n = t.name
    if len(t.params) == len(n.formals):
        return t.params
    extra = tuple(TypeVar(f.name, f.ub, implicit=True)
                  for f in n.formals[len(t.params):])
    return t.params + extra


# ---------------------------------------------------------------- printing

def show(t) -> str:
    if t is AnyType:
        return "Any"
    if t is Bottom:
        return "None"
    if t is ANY:
        return "ANY"
    if isinstance(t, TypeVar):
        if t.ub is not AnyType:
            return f"{t.name}<:{show(t.ub)}"
        return t.name
    if isinstance(t, Apply):
        if not t.params:
            return t.name.name
        return f"{t.name.name}{{{','.join(_show_param(p) for p in t.params)}}}"
    if isinstance(t, Vararg):
        return f"{show(t.elem)}..."
    if isinstance(t, TupleType):
        if len(t.elems) == 1 and not isinstance(t.elems[0], Vararg):
            return f"({show(t.elems[0])},)"
        return "(" + ", ".join(show(e) for e in t.elems) + ")"
    if isinstance(t, UnionType):
        return "Union(" + ",".join(show(m) for m in t.members) + ")"
    if isinstance(t, Kind):
        return f"Type{{{show(t.inner)}}}"
    if isinstance(t, tuple):
        return show(as_type(t))
    return repr(t)


def _show_param(p) -> str:
    if isinstance(p, TypeVar):
        return p.name
    if isinstance(p, TypeTerm):
        return show(p)
    if isinstance(p, bool):
        return "true" if p else "false"
    return repr(p)


def show_sig(name: str, sig) -> str:
    """Signature in the warning notation: ``foo(Int64,Number)``."""
    if isinstance(sig, TupleType):
        return f"{name}(" + ",".join(show(e) for e in sig.elems) + ")"
    return f"{name}{show(sig)}"


# ---------------------------------------------------------------- registry

@dataclass
class TypeRegistry:
    """All declared families plus the hash-consing table."""

    names: dict = field(default_factory=dict)
    _consed: dict = field(default_factory=dict)
    _by_id: list = field(default_factory=list)
    _ids: Iterator[int] = field(default_factory=itertools.count)

    def __post_init__(self):
        from .lattice import DataTypeName
        self.names["DataType"] = DataTypeName
        self.declare("Function", (), COMPOSITE, AnyType)
        self.declare("Nothing", (), COMPOSITE, AnyType)
        self.declare("Expr", (), COMPOSITE, AnyType)

    def __getitem__(self, name: str) -> TypeTerm:
        return self.lookup(name)

    def lookup(self, name: str) -> TypeTerm:
        if name == "Any":
            return AnyType
        if name == "None":
            return Bottom
        if name == "ANY":
            return ANY
        try:
            return Apply(self.names[name])
        except KeyError:
            raise TypeError_(f"undefined type {name}") from None

    def family(self, name: str) -> TypeName:
        return self.names[name]

    def declare(self, name, formals, kind, super_template=AnyType, field_names=(),
                field_types=(), nbits=0) -> TypeName:
        if name in self.names or name in ("Any", "None", "Type", "Union"):
            raise TypeError_(f"invalid redefinition of type {name}")
        if super_template is not AnyType:
            if not isinstance(super_template, Apply):
                raise TypeError_(f"{name}: supertype must be a declared type")
            if not super_template.name.abstract:
                raise TypeError_(
                    f"{name}: cannot subtype concrete type {super_template.name.name}")
            for v in free_vars(super_template):
                if all(v is not f for f in formals):
                    raise TypeError_(f"{name}: supertype mentions unbound {v.name}")
        if len(field_names) != len(field_types):
            raise TypeError_(f"{name}: field name/type count mismatch")
        if kind == BITS and nbits <= 0:
            raise TypeError_(f"{name}: bits type needs a positive width")
        tn = TypeName(name, formals, kind, super_template, field_names,
                      field_types, nbits, id=len(self.names) + 1)
        self.names[name] = tn
        return tn

    def apply(self, tn: TypeName, params) -> TypeTerm:
        params = tuple(params)
        if len(params) > len(tn.formals):
            raise TypeError_(f"too many parameters for type {tn.name}")
        from .lattice import subtype
        for p, f in zip(params, tn.formals):
            if isinstance(p, TypeTerm) and not isinstance(p, TypeVar):
                if not subtype(p, f.ub):
                    raise TypeError_(
                        f"{tn.name}: parameter {show(p)} violates bound {f.name}<:{show(f.ub)}")
            elif isinstance(p, TypeVar):
                pass
            elif not isinstance(p, (int, bool)):
                raise TypeError_(f"{tn.name}: invalid type parameter {p!r}")
            elif f.ub is not AnyType:
                raise TypeError_(
                    f"{tn.name}: parameter {p!r} violates bound {f.name}<:{show(f.ub)}")
        t = Apply(tn, params)
        if is_concrete(t):
            return self.consed(t)
        return t

    def intern(self, t) -> int:
        if not is_concrete(t):
            raise TypeError_(f"cannot intern non-concrete type {show(t)}")
        entry = self._consed.get(t)
        if entry is None:
            entry = (next(self._ids), t)
            self._consed[t] = entry
            self._by_id.append(t)
        return entry[0]

    def consed(self, t):
        """Canonical (identity-comparable) instance of a concrete term."""
        entry = self._consed.get(t)
        if entry is None:
            self.intern(t)
            entry = self._consed[t]
        return entry[1]

    def by_id(self, i: int):
        return self._by_id[i]

    def concrete_names(self):
        return [tn for tn in self.names.values()
                if tn.kind != ABSTRACT and not tn.formals]
