"""Generic functions: sorted method tables, the specialization cache and its heuristics."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .lattice import (intersect, intersect_full, match, morespecific, subtype,
                      type_equal, union_all)
from .types import (ANY, AnyType, Bottom, Kind, TupleType, TypeVar, UnionType,
                    Vararg, free_vars, has_vars, is_concrete, show, show_sig)


class NoMethodError(Exception):
    pass


# shared so that equally widened entry signatures compare equal
_KIND_T = TypeVar("T")


@dataclass(eq=False)
class MethodDef:
    name: str
    sig: TupleType
    sparams: tuple
    code: object                 # IRFunction
    staged: bool = False
    line: int = 0
    # argtypes -> generated MethodDef (staged methods only)
    expansions: dict = field(default_factory=dict)
    # entry signature -> Specialization
    specs: dict = field(default_factory=dict)
    # the staged method this one was generated from
    origin: object = None

    def __repr__(self) -> str:
        return show_sig(self.name, self.sig)

    @property
    def nargs(self) -> tuple:
        """(minimum, maximum or None) argument count."""
        n = len(self.sig.fixed)
        return (n, None if self.sig.vararg is not None else n)


@dataclass(eq=False)
class CacheEntry:
    sig: TupleType
    method: MethodDef | None
    spec: object = None
    dummy: bool = False


@dataclass
class Bucket:
    # exact concrete argument tuples; identity comparable because they are consed
    exact: dict = field(default_factory=dict)
    widened: list = field(default_factory=list)


class GenericFunction:
    def __init__(self, name: str):
        self.name = name
        self.methods: list = []
        self.cache: dict = {}
        self.dummies: list = []
        self.max_args = 0
        self._ms: dict = {}

    def __repr__(self) -> str:
        return self.name

    # ------------------------------------------------------------ method table

    def _more(self, a: MethodDef, b: MethodDef) -> bool:
        key = (id(a), id(b))
        r = self._ms.get(key)
        if r is None:
            r = self._ms[key] = morespecific(a.sig, b.sig)
        return r

    def _strictly(self, a, b) -> bool:
        return self._more(a, b) and not self._more(b, a)

    def add_method(self, m: MethodDef) -> list:
        """Insert in specificity order; returns ambiguity warning strings."""
        self.flush()
        for i, old in enumerate(self.methods):
            if type_equal(old.sig, m.sig) and len(old.sparams) == len(m.sparams) \
                    and self._more(m, old) and self._more(old, m):
                self.methods[i] = m
                self._update_max()
                return []
        pos = len(self.methods)
        for i, old in enumerate(self.methods):
            if self._more(m, old):
                pos = i
                break
        self.methods.insert(pos, m)
        if any(self._strictly(other, m) for other in self.methods[pos + 1:]) or \
                any(self._strictly(m, other) for other in self.methods[:pos]):
            self._resort()
        self._update_max()
        return self._ambiguities(m)

    def _resort(self):
        # stable topological order under the strict part of morespecific
        pending = list(self.methods)
        out = []
        while pending:
            for k, cand in enumerate(pending):
                if not any(self._strictly(o, cand) for o in pending if o is not cand):
                    out.append(pending.pop(k))
                    break
            else:
                out.extend(pending)
                break
        self.methods = out

    def _update_max(self):
        self.max_args = max((len(m.sig.fixed) + (1 if m.sig.vararg is not None else 0)
                             for m in self.methods), default=0)

    def _ambiguities(self, m: MethodDef) -> list:
        warnings = []
        for old in self.methods:
            if old is m:
                continue
            if self._more(m, old) or self._more(old, m):
                continue
            i = intersect(m.sig, old.sig)
            if i is Bottom:
                continue
            if any(k is not m and k is not old and subtype(i, k.sig)
                   and self._more(k, m) and self._more(k, old) for k in self.methods):
                continue
            warnings.append(
                f"Warning: New definition {show_sig(self.name, m.sig)} is ambiguous with "
                f"{show_sig(self.name, old.sig)}. Make sure {show_sig(self.name, i)} "
                f"is defined first.")
        return warnings

    def check_sorted(self) -> bool:
        ms = self.methods
        return not any(self._strictly(ms[j], ms[i])
                       for i in range(len(ms)) for j in range(i + 1, len(ms)))

    def flush(self):
        self.cache.clear()
        self.dummies.clear()

    # ------------------------------------------------------------ lookup

    def slow_lookup(self, argt: TupleType):
        """First method in sorted order matching the concrete argument tuple."""
        for m in self.methods:
            sol = match(argt, m.sig)
            if sol is not None:
                return m, sol
        return None, None

    def cache_lookup(self, argt: TupleType, key, stats: Counter):
        b = self.cache.get(key)
        if b is not None:
            e = b.exact.get(argt)
            if e is not None:
                return e
        for d in self.dummies:
            if subtype(argt, d.sig):
                stats["dummy_hits"] += 1
                return d
        for bucket in (b, self.cache.get(None)):
            if bucket is None:
                continue
            for e in bucket.widened:
                if subtype(argt, e.sig):
                    return e
        return None

    def install(self, key, argt, entry: CacheEntry, dummies=()):
        if entry.sig is argt or entry.sig == argt:
            self.cache.setdefault(key, Bucket()).exact[argt] = entry
        else:
            first = entry.sig.elems[0] if entry.sig.elems else None
            k = key if first is not None and not isinstance(first, Vararg) \
                and is_concrete(first) else None
            self.cache.setdefault(k, Bucket()).widened.append(entry)
        for d in dummies:
            self.dummies.insert(0, d)

    # ------------------------------------------------------------ heuristics

    def specialize_signature(self, m: MethodDef, argt: TupleType, reg) -> TupleType:
        """Entry signature for a cache entry; a supertype of argt that stays within m."""
        decl = m.sig
        slots = list(argt.elems)
        n = len(slots)
        for i, t in enumerate(slots):
            d = _decl_slot(decl, i)
            if d is ANY:
                slots[i] = AnyType
                continue
            if isinstance(t, Kind):
                if not self._slot_mentions_kind(i):
                    slots[i] = Kind(_KIND_T)
                elif isinstance(t.inner, Kind) and _kind_depth(d) < 2:
                    slots[i] = Kind(_KIND_T)
            elif isinstance(t, TupleType):
                w = intersect(d, TupleType((Vararg(AnyType),)))
                if w is not Bottom and not has_vars(w) and subtype(t, w):
                    slots[i] = w
        capped = False
        va = decl.vararg
        if (va is not None and n > self.max_args and self.max_args > 0
                and not _mentions(va, m.sparams)):
            keep = max(self.max_args - 1, len(decl.fixed))
            slots = slots[:keep] + [Vararg(AnyType)]
            capped = True
        w = TupleType(tuple(slots))
        if w == argt:
            return argt
        r = intersect(w, decl) if (capped or has_vars(decl)) else w
        if r is Bottom or not subtype(argt, r) or not subtype(r, decl):
            return argt
        return r

    def _slot_mentions_kind(self, i: int) -> bool:
        for m in self.methods:
            if _has_kind(_decl_slot(m.sig, i)):
                return True
        return False

    def dummies_for(self, m: MethodDef, w: TupleType) -> list:
        out = []
        for other in self.methods:
            if other is m:
                break
            i = intersect(w, other.sig)
            if i is not Bottom:
                out.append(CacheEntry(i, other, dummy=True))
        return out

    # ------------------------------------------------------------ inference support

    def method_matches(self, targ, early_stop: bool = True) -> list:
        """(intersection, method, substitution, exact vars) for every applicable method."""
        out = []
        seen = []
        for m in self.methods:
            r, sub, exact = intersect_full(targ, m.sig)
            if r is Bottom:
                continue
            out.append((r, m, sub, exact))
            if early_stop:
                if subtype(targ, m.sig):
                    break
                seen.append(m.sig)
                if len(seen) > 1 and subtype(targ, union_all(seen)):
                    break
        return out


def _decl_slot(sig: TupleType, i: int):
    if i < len(sig.fixed):
        return sig.fixed[i]
    return sig.vararg if sig.vararg is not None else AnyType


def _has_kind(t) -> bool:
    if isinstance(t, Kind):
        return True
    if isinstance(t, UnionType):
        return any(_has_kind(x) for x in t.members)
    if isinstance(t, TypeVar):
        return False
    return False


def _kind_depth(t) -> int:
    d = 0
    while isinstance(t, Kind):
        d += 1
        t = t.inner
    return d


def _mentions(t, vs) -> bool:
    ids = {id(v) for v in vs}
    return any(id(v) in ids for v in free_vars(t))


def argtuple_str(argt) -> str:
    return show(argt)
