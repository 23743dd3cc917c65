"""Subtype, union, intersection, specificity and widening over TypeTerms.

Free type variables on the right-hand side of ``subtype`` are existential:
they are solved by matching. Variables occurring only on the left are
universal and behave like their upper bound. A variable occurring more than
once in covariant position and never in invariant position (a diagonal
variable) only matches concrete types, so ``(Int64,Float64) <= (T,T)`` fails.
"""

from __future__ import annotations

from collections import defaultdict

from .types import (
    ABSTRACT, ANY, Apply, AnyType, Bottom, Kind, TupleType, TypeName, TypeTerm,
    TypeVar, UnionType, Vararg, free_vars, full_params, has_vars, is_concrete,
    rename_vars, substitute, supertype,
)

DataTypeName = TypeName("DataType", (), ABSTRACT, AnyType, id=0)
DataType = Apply(DataTypeName)

EQ = "="
LE = "<="

# ---------------------------------------------------------------- subtype


class _MatchEnv:
    """Bindings for existential variables while checking ``a <= b``."""

    def __init__(self, b):
        self.vars = free_vars(b)
        self.ids = {id(v) for v in self.vars}
        cov: dict = defaultdict(int)
        inv: dict = defaultdict(int)
        _count_occurrences(b, cov, inv, False)
        self.diag = {i for i, c in cov.items() if c > 1 and not inv.get(i)}
        self.eq: dict = {}
        self.lbs: dict = defaultdict(list)

    def copy(self):
        e = object.__new__(_MatchEnv)
        e.vars, e.ids, e.diag = self.vars, self.ids, self.diag
        e.eq = dict(self.eq)
        e.lbs = defaultdict(list, {k: list(v) for k, v in self.lbs.items()})
        return e

    def update(self, other):
        self.eq, self.lbs = other.eq, other.lbs

    def owns(self, v) -> bool:
        return isinstance(v, TypeVar) and id(v) in self.ids

    def bind_eq(self, v, x) -> bool:
        k = id(v)
        if k in self.eq:
            return _param_equal(self.eq[k], x)
        if isinstance(x, TypeVar):
            if x is not v and not subtype(x.ub, v.ub):
                return False
        elif isinstance(x, TypeTerm):
            if not _sub(x, v.ub, None, False):
                return False
        elif v.ub is not AnyType:
            return False
        self.eq[k] = x
        return True

    def bind_cov(self, v, x) -> bool:
        k = id(v)
        if k in self.diag:
            if not (is_concrete(x) or isinstance(x, TypeVar) or x is Bottom):
                return False
            return self.bind_eq(v, x)
        if k in self.eq:
            return _sub(x, self.eq[k], None, False)
        ub = x.ub if isinstance(x, TypeVar) else x
        if not _sub(ub, v.ub, None, False):
            return False
        self.lbs[k].append(x)
        return True

    def check(self) -> bool:
        for k, val in self.eq.items():
            if isinstance(val, TypeTerm):
                for lb in self.lbs.get(k, ()):
                    if not _sub(lb, val, None, False):
                        return False
        return True

    def solution(self) -> dict:
        out = {}
        for v in self.vars:
            k = id(v)
            if k in self.eq:
                out[v] = self.eq[k]
            elif self.lbs.get(k):
                out[v] = union_all(self.lbs[k])
        return out


def _count_occurrences(t, cov, inv, invariant):
    if isinstance(t, TypeVar):
        (inv if invariant else cov)[id(t)] += 1
    elif isinstance(t, TupleType):
        for e in t.elems:
            if isinstance(e, Vararg):
                _count_occurrences(e.elem, cov, inv, invariant)
                _count_occurrences(e.elem, cov, inv, invariant)
            else:
                _count_occurrences(e, cov, inv, invariant)
    elif isinstance(t, UnionType):
        for m in t.members:
            _count_occurrences(m, cov, inv, invariant)
    elif isinstance(t, Apply):
        for p in t.params:
            _count_occurrences(p, cov, inv, True)
    elif isinstance(t, Kind):
        _count_occurrences(t.inner, cov, inv, True)


_cache: dict = {}


def subtype(a, b) -> bool:
    """``a <= b``."""
    if a is b or b is AnyType:
        return True
    if not has_vars(b):
        if has_vars(a):
            return _sub(a, b, None, False)
        key = (a, b)
        r = _cache.get(key)
        if r is None:
            r = _cache[key] = _sub(a, b, None, False)
        return r
    env = _MatchEnv(b)
    return _sub(a, b, env, False) and env.check()


def subtype_relaxed(a, b) -> bool:
    """Like subtype, but a declared subfamily matches regardless of parameters."""
    env = _MatchEnv(b) if has_vars(b) else None
    return _sub(a, b, env, True) and (env is None or env.check())


def match(a, b) -> dict | None:
    """Solve b's variables so that ``a <= b``; None when no solution exists."""
    env = _MatchEnv(b)
    if _sub(a, b, env, False) and env.check():
        return env.solution()
    return None


def _sub(a, b, env, relax) -> bool:
    if a is b or a is Bottom or b is AnyType or b is ANY:
        return True
    if a is ANY:
        a = AnyType
    if env is not None:
        if env.owns(b):
            return env.bind_cov(b, a)
        if env.owns(a):
            bound = env.eq.get(id(a))
            a = bound if isinstance(bound, TypeTerm) else a.ub
            return _sub(a, b, env, relax)
    if isinstance(a, TypeVar):
        if isinstance(b, TypeVar):
            return False
        return _sub(a.ub, b, env, relax)
    if isinstance(a, UnionType):
        return all(_sub(m, b, env, relax) for m in a.members)
    if isinstance(b, UnionType):
        for m in b.members:
            if env is None:
                if _sub(a, m, None, relax):
                    return True
            else:
                trial = env.copy()
                if _sub(a, m, trial, relax):
                    env.update(trial)
                    return True
        return False
    if isinstance(b, TypeVar):
        return False
    if isinstance(a, TupleType):
        if not isinstance(b, TupleType):
            return False
        return _sub_tuple(a, b, env, relax)
    if isinstance(b, TupleType):
        return False
    if isinstance(a, Kind):
        if isinstance(b, Kind):
            return _inv(a.inner, b.inner, env)
        return _sub(DataType, b, env, relax)
    if isinstance(b, Kind) or a is AnyType:
        return False
    if isinstance(a, Apply) and isinstance(b, Apply):
        walked = False
        while isinstance(a, Apply):
            if a.name is b.name:
                if relax and walked:
                    return True
                return _params_sub(a, b, env)
            a = supertype(a)
            walked = True
        return False
    return False


def _sub_tuple(a: TupleType, b: TupleType, env, relax) -> bool:
    fa, va = a.fixed, a.vararg
    fb, vb = b.fixed, b.vararg
    if va is not None:
        if vb is None or len(fa) < len(fb):
            return False
    elif vb is None:
        if len(fa) != len(fb):
            return False
    elif len(fa) < len(fb):
        return False
    for i, x in enumerate(fa):
        y = fb[i] if i < len(fb) else vb
        if not _sub(x, y, env, relax):
            return False
    if va is not None:
        for y in fb[len(fa):]:
            if not _sub(va, y, env, relax):
                return False
        if not _sub(va, vb, env, relax):
            return False
    return True


def _params_sub(a: Apply, b: Apply, env) -> bool:
    pa, pb = a.params, b.params
    for i, y in enumerate(pb):
        if i >= len(pa):
            # omitted on the left ranges over everything its formal allows
            if env is not None and env.owns(y):
                f = a.name.formals[i]
                if not subtype(f.ub, y.ub):
                    return False
                continue
            return False
        if not _inv(pa[i], y, env):
            return False
    return True


def _inv(x, y, env) -> bool:
    """Invariant comparison of two type parameters."""
    if env is not None:
        if env.owns(y):
            return env.bind_eq(y, x)
        if env.owns(x):
            return env.bind_eq(x, y)
    if isinstance(x, TypeVar) or isinstance(y, TypeVar):
        return x is y
    if not isinstance(x, TypeTerm) or not isinstance(y, TypeTerm):
        return _param_equal(x, y)
    return _sub(x, y, env, False) and _sub(y, x, env, False)


def _param_equal(x, y) -> bool:
    if isinstance(x, TypeVar) or isinstance(y, TypeVar):
        return x is y
    if isinstance(x, TypeTerm) and isinstance(y, TypeTerm):
        return type_equal(x, y)
    if isinstance(x, TypeTerm) or isinstance(y, TypeTerm):
        return False
    return type(x) is type(y) and x == y


def type_equal(a, b) -> bool:
    if a is b:
        return True
    return subtype(a, b) and subtype(b, a)


# ---------------------------------------------------------------- union

def _order_key(t):
    if isinstance(t, Apply):
        return (1, t.name.id, str(t))
    if isinstance(t, TupleType):
        return (2, len(t.elems), str(t))
    if isinstance(t, Kind):
        return (3, 0, str(t))
    if isinstance(t, TypeVar):
        return (4, t.uid, t.name)
    return (0, 0, str(t))


def union_all(ts) -> TypeTerm:
    flat: list = []
    for t in ts:
        if isinstance(t, UnionType):
            flat.extend(t.members)
        elif t is ANY:
            flat.append(AnyType)
        elif t is not Bottom:
            flat.append(t)
    if not flat:
        return Bottom
    if any(t is AnyType for t in flat):
        return AnyType
    kept: list = []
    for i, t in enumerate(flat):
        redundant = False
        for j, u in enumerate(flat):
            if i == j:
                continue
            if subtype(t, u):
                # keep the first of two equal members
                if not subtype(u, t) or j < i:
                    redundant = True
                    break
        if not redundant:
            kept.append(t)
    if len(kept) == 1:
        return kept[0]
    kept.sort(key=_order_key)
    return UnionType(tuple(kept))


def union(a, b) -> TypeTerm:
    if a is b:
        return a
    return union_all((a, b))


def join(a, b, cutoff: int) -> TypeTerm:
    return widen_union(union(a, b), cutoff)


# ---------------------------------------------------------------- intersection

class ConstraintEnv:
    def __init__(self):
        self.entries: list = []

    def add(self, var, rel, rhs):
        self.entries.append((var, rel, rhs))

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def _closed(t) -> bool:
    """No free variables and no omitted parameters anywhere."""
    if isinstance(t, TypeVar):
        return False
    if isinstance(t, Apply):
        if len(t.params) != len(t.name.formals):
            return False
        return all(_closed(p) for p in t.params if isinstance(p, TypeTerm))
    if isinstance(t, TupleType):
        return all(_closed(e) for e in t.elems)
    if isinstance(t, Vararg):
        return _closed(t.elem)
    if isinstance(t, UnionType):
        return all(_closed(m) for m in t.members)
    if isinstance(t, Kind):
        return _closed(t.inner)
    return True


def intersect(a, b, env: ConstraintEnv | None = None) -> TypeTerm:
    """A type containing every value in both ``a`` and ``b``."""
    return intersect_full(a, b, env)[0]


def intersect_full(a, b, env: ConstraintEnv | None = None):
    """Intersection plus the solved substitution and the exactly-solved vars."""
    if a is b:
        return a, {}, set()
    if a is Bottom or b is Bottom:
        return Bottom, {}, set()
    if a is AnyType or a is ANY:
        return b, {}, set()
    if b is AnyType or b is ANY:
        return a, {}, set()
    if env is None and is_concrete(a):
        sol = match(a, b)
        return (a, sol, set(sol)) if sol is not None else (Bottom, {}, set())
    if env is None and is_concrete(b) and not has_vars(a):
        return (b, {}, set()) if subtype(b, a) else (Bottom, {}, set())
    if env is None and _closed(a) and _closed(b):
        if subtype(a, b):
            return a, {}, set()
        if subtype(b, a):
            return b, {}, set()
        if isinstance(a, (Apply, Kind)) and isinstance(b, (Apply, Kind)):
            return Bottom, {}, set()
    env = ConstraintEnv() if env is None else env
    r = _meet(a, b, env)
    if r is Bottom:
        return Bottom, {}, set()
    solved = solve_constraints(env)
    if solved is Bottom:
        return Bottom, {}, set()
    sub, exact = solved
    return _clean(substitute(r, _result_sub(r, sub, exact))), sub, exact


def _result_sub(r, sub, exact) -> dict:
    """Bound-only variables under an invariant parameter stay variables, narrowed."""
    cov, inv = defaultdict(int), defaultdict(int)
    _count_occurrences(r, cov, inv, False)
    out = {}
    for v, x in sub.items():
        if v not in exact and inv[id(v)] and isinstance(x, TypeTerm) and not isinstance(x, TypeVar):
            out[v] = TypeVar(v.name, x, v.implicit)
        else:
            out[v] = x
    return out


def _meet(a, b, env) -> TypeTerm:
    if a is Bottom or b is Bottom:
        return Bottom
    if a is AnyType or a is ANY:
        return b
    if b is AnyType or b is ANY or a is b:
        return a
    if isinstance(a, UnionType):
        return union_all(_meet_branch(m, b) for m in a.members)
    if isinstance(b, UnionType):
        return union_all(_meet_branch(a, m) for m in b.members)
    if isinstance(a, TypeVar):
        env.add(a, LE, b)
        return a
    if isinstance(b, TypeVar):
        env.add(b, LE, a)
        return b
    if isinstance(a, TupleType) or isinstance(b, TupleType):
        if not (isinstance(a, TupleType) and isinstance(b, TupleType)):
            return Bottom
        return _meet_tuple(a, b, env)
    if isinstance(a, Kind) or isinstance(b, Kind):
        if isinstance(a, Kind) and isinstance(b, Kind):
            inner = _meet_inv(a.inner, b.inner, env)
            return Bottom if inner is Bottom else Kind(inner)
        k, other = (a, b) if isinstance(a, Kind) else (b, a)
        return k if subtype(DataType, other) else Bottom
    if isinstance(a, Apply) and isinstance(b, Apply):
        return _meet_nominal(a, b, env)
    return Bottom


def _meet_branch(a, b):
    # union alternatives are disjunctive; solve each one locally
    return intersect(a, b)


def _meet_tuple(a: TupleType, b: TupleType, env) -> TypeTerm:
    fa, va = a.fixed, a.vararg
    fb, vb = b.fixed, b.vararg
    if va is None and vb is None and len(fa) != len(fb):
        return Bottom
    if va is None and len(fa) < len(fb):
        return Bottom
    if vb is None and len(fb) < len(fa):
        return Bottom
    n = max(len(fa), len(fb))
    if va is None or vb is None:
        n = len(fa) if va is None else len(fb)
    out = []
    for i in range(n):
        x = fa[i] if i < len(fa) else va
        y = fb[i] if i < len(fb) else vb
        m = _meet(x, y, env)
        if m is Bottom:
            return Bottom
        out.append(m)
    if va is not None and vb is not None:
        tail = _meet(va, vb, env)
        if tail is not Bottom:
            out.append(Vararg(tail))
    return TupleType(tuple(out))


def _meet_inv(x, y, env):
    if isinstance(x, TypeVar):
        env.add(x, EQ, y)
        return x
    if isinstance(y, TypeVar):
        env.add(y, EQ, x)
        return y
    if not isinstance(x, TypeTerm) or not isinstance(y, TypeTerm):
        return x if _param_equal(x, y) else Bottom
    if isinstance(x, Apply) and isinstance(y, Apply) and x.name is y.name:
        return _meet_same(x, y, env)
    if isinstance(x, Kind) and isinstance(y, Kind):
        inner = _meet_inv(x.inner, y.inner, env)
        return Bottom if inner is Bottom else Kind(inner)
    if isinstance(x, TupleType) and isinstance(y, TupleType) and len(x.elems) == len(y.elems):
        out = []
        for p, q in zip(x.elems, y.elems):
            if isinstance(p, Vararg) != isinstance(q, Vararg):
                return Bottom
            if isinstance(p, Vararg):
                m = _meet_inv(p.elem, q.elem, env)
                m = m if m is Bottom else Vararg(m)
            else:
                m = _meet_inv(p, q, env)
            if m is Bottom:
                return Bottom
            out.append(m)
        return TupleType(tuple(out))
    if has_vars(x) or has_vars(y):
        # cannot align structurally; fall back to a covariant meet
        return _meet(x, y, env)
    return x if type_equal(x, y) else Bottom


def _meet_same(a: Apply, b: Apply, env) -> TypeTerm:
    pa, pb = full_params(a), full_params(b)
    out = []
    for x, y in zip(pa, pb):
        m = _meet_inv(x, y, env)
        if m is Bottom:
            return Bottom
        out.append(m)
    return Apply(a.name, tuple(out))


def _is_ancestor(anc: TypeName, t: Apply) -> bool:
    while isinstance(t, Apply):
        if t.name is anc:
            return True
        t = t.name.super_template
    return False


def _meet_nominal(a: Apply, b: Apply, env) -> TypeTerm:
    if a.name is b.name:
        return _meet_same(a, b, env)
    if _is_ancestor(b.name, a.name.super_template):
        sub, sup = a, _meet(supertype(a), b, env)
    elif _is_ancestor(a.name, b.name.super_template):
        sub, sup = b, _meet(a, supertype(b), env)
    else:
        return Bottom
    if sup is Bottom:
        return Bottom
    e = conform(sup, sub.name.super_template)
    if e is None:
        return Bottom
    formals = sub.name.formals
    mapping = {}
    for var, rel, rhs in e:
        if any(var is f for f in formals):
            if id(var) in mapping and not _param_equal(mapping[id(var)], rhs):
                env.add(var, EQ, rhs)
            mapping.setdefault(id(var), rhs)
        else:
            return Bottom
    inst = Apply(sub.name, tuple(mapping.get(id(f), _implicit(f)) for f in formals))
    return _meet_same(sub, inst, env)


def _implicit(f: TypeVar) -> TypeVar:
    return TypeVar(f.name, f.ub, implicit=True)


def conform(sup, template) -> ConstraintEnv | None:
    """Align ``template``'s variables with the components of ``sup``."""
    env = ConstraintEnv()
    return env if _conform(sup, template, env) else None


def _conform(s, t, env) -> bool:
    if isinstance(t, TypeVar):
        env.add(t, EQ, s)
        return True
    if isinstance(s, TypeVar):
        # the other side is still open; accept and let the solver decide
        return True
    if isinstance(t, Apply) and isinstance(s, Apply):
        if t.name is not s.name:
            return False
        ps = full_params(s)
        for x, y in zip(ps, t.params):
            if not _conform(x, y, env):
                return False
        return True
    if isinstance(t, TupleType) and isinstance(s, TupleType):
        if len(t.elems) != len(s.elems):
            return False
        return all(_conform(x, y, env) for x, y in zip(s.elems, t.elems))
    if isinstance(t, Vararg) and isinstance(s, Vararg):
        return _conform(s.elem, t.elem, env)
    if isinstance(t, Kind) and isinstance(s, Kind):
        return _conform(s.inner, t.inner, env)
    if isinstance(t, TypeTerm) and isinstance(s, TypeTerm):
        return type_equal(s, t)
    return _param_equal(s, t)


def solve_constraints(env):
    """Returns (substitution, exactly_solved_vars) or Bottom on conflict."""
    parent: dict = {}
    byid: dict = {}

    def find(k):
        while parent.get(k, k) != k:
            k = parent[k]
        return k

    eqs: dict = defaultdict(list)
    les: dict = defaultdict(list)
    for var, rel, rhs in env:
        byid[id(var)] = var
        if rel == LE and isinstance(rhs, TypeTerm) and is_concrete(rhs):
            rel = EQ
        if rel == EQ:
            if isinstance(rhs, TypeVar):
                byid[id(rhs)] = rhs
                ra, rb = find(id(var)), find(id(rhs))
                if ra != rb:
                    parent[ra] = rb
            else:
                eqs[id(var)].append(rhs)
        else:
            les[id(var)].append(rhs)

    classes: dict = defaultdict(list)
    for k in byid:
        classes[find(k)].append(k)

    sub: dict = {}
    exact: set = set()
    for root, members in classes.items():
        values = [x for m in members for x in eqs.get(m, ())]
        value = None
        for x in values:
            if value is None:
                value = x
            elif not _param_equal(value, x):
                return Bottom
        bounds = [x for m in members for x in les.get(m, ())]
        if value is not None:
            if isinstance(value, TypeTerm) and not has_vars(value):
                for m in members:
                    if not subtype(value, byid[m].ub):
                        return Bottom
                for bd in bounds:
                    if not has_vars(bd) and not subtype(value, bd):
                        return Bottom
            elif isinstance(value, TypeTerm):
                # an open value must still be compatible with its bounds
                for bd in bounds + [byid[m].ub for m in members]:
                    if not has_vars(bd) and intersect(value, bd) is Bottom:
                        return Bottom
            for m in members:
                sub[byid[m]] = value
                exact.add(byid[m])
            continue
        for m in members:
            ub = byid[m].ub
            if ub is not AnyType:
                bounds.append(ub)
        rep = byid[root]
        if bounds:
            b = _coarse_meet(bounds)
            for m in members:
                sub[byid[m]] = b
        else:
            for m in members:
                if m != root:
                    sub[byid[m]] = rep
    # resolve chains: a value may mention other solved variables
    for _ in range(len(sub)):
        changed = False
        for v, x in list(sub.items()):
            if isinstance(x, TypeTerm) and has_vars(x):
                y = substitute(x, {k: w for k, w in sub.items() if k is not v})
                if y != x:
                    sub[v] = y
                    changed = True
        if not changed:
            break
    return sub, exact


def _coarse_meet(bounds):
    cur = bounds[0]
    for b in bounds[1:]:
        if subtype(b, cur):
            cur = b
    return cur


def _clean(t):
    """Drop trailing parameters that are unsolved implicit variables."""
    if isinstance(t, Apply) and t.params:
        ps = [_clean(p) if isinstance(p, TypeTerm) else p for p in t.params]
        while ps and isinstance(ps[-1], TypeVar) and ps[-1].implicit:
            ps.pop()
        return Apply(t.name, tuple(ps))
    if isinstance(t, TupleType):
        return TupleType(tuple(_clean(e) for e in t.elems))
    if isinstance(t, Vararg):
        return Vararg(_clean(t.elem))
    if isinstance(t, Kind):
        return Kind(_clean(t.inner))
    if isinstance(t, UnionType):
        return union_all(_clean(m) for m in t.members)
    return t


# ---------------------------------------------------------------- specificity

def morespecific(a, b) -> bool:
    """``a`` is not less specific than ``b`` (method signature order)."""
    a, _ = rename_vars(a)
    b, _ = rename_vars(b)
    return _ms(a, b, set())


def _has_union(t) -> bool:
    if isinstance(t, UnionType):
        return True
    if isinstance(t, TupleType):
        return any(isinstance(e, UnionType) for e in t.elems)
    return False


def _ms_basic(a, b) -> bool:
    if subtype(a, b):
        return True
    if subtype_relaxed(a, b):
        return True
    if isinstance(a, TupleType) and isinstance(b, TupleType):
        expanded = _expand_vararg(a, b)
        # a fixed tuple inside the vararg one is the more specific of the two
        if expanded is not None and _ms_basic(expanded, b) and not subtype(b, a):
            return True
    return _rule5(a, b)


def _ms(a, b, guard) -> bool:
    if _ms_basic(a, b):
        return True
    key = (a, b)
    if key in guard or not _has_union(a):
        return False
    guard.add(key)
    try:
        i = intersect(a, b)
        if i is Bottom or type_equal(i, b):
            return False
        return _ms(i, b, guard) and not _ms_basic(b, a)
    finally:
        guard.discard(key)


def _expand_vararg(a: TupleType, b: TupleType):
    va = a.vararg
    if va is None:
        return None
    fa, fb = a.fixed, b.fixed
    if len(fa) >= len(fb):
        return None
    elems = fa + (va,) * (len(fb) - len(fa))
    if b.vararg is not None:
        elems = elems + (Vararg(va),)
    return TupleType(elems)


def _unbounded(t):
    vs = free_vars(t)
    return substitute(t, {v: TypeVar(v.name) for v in vs}) if vs else t


def _rule5(a, b) -> bool:
    if not (has_vars(a) and has_vars(b)):
        return False
    ua, ub = _unbounded(a), _unbounded(b)
    return match(ua, ub) is not None and match(ub, ua) is None


# ---------------------------------------------------------------- widening

def widen_union(u, cutoff: int) -> TypeTerm:
    if isinstance(u, UnionType) and len(u.members) > cutoff:
        return AnyType
    return u


def cap_tuple(t, max_depth: int, max_len: int, _depth: int = 0) -> TypeTerm:
    if isinstance(t, UnionType):
        return union_all(cap_tuple(m, max_depth, max_len, _depth) for m in t.members)
    if not isinstance(t, TupleType):
        return t
    if _depth >= max_depth:
        return AnyType
    elems = []
    for e in t.elems:
        if isinstance(e, Vararg):
            elems.append(Vararg(cap_tuple(e.elem, max_depth, max_len, _depth + 1)))
        else:
            elems.append(cap_tuple(e, max_depth, max_len, _depth + 1))
    fixed = [e for e in elems if not isinstance(e, Vararg)]
    va = elems[-1].elem if elems and isinstance(elems[-1], Vararg) else None
    if len(fixed) > max_len:
        tail = fixed[max_len - 1:] + ([va] if va is not None else [])
        elems = fixed[:max_len - 1] + [Vararg(union_all(tail))]
    return TupleType(tuple(elems))


def cap_kind(t, max_depth: int, _depth: int = 0) -> TypeTerm:
    """Replace singleton-kind nestings deeper than max_depth with Type{T}."""
    if isinstance(t, Kind):
        if _depth + 1 >= max_depth:
            return Kind(TypeVar("T"))
        return Kind(cap_kind(t.inner, max_depth, _depth + 1))
    if isinstance(t, TupleType):
        return TupleType(tuple(
            Vararg(cap_kind(e.elem, max_depth, _depth)) if isinstance(e, Vararg)
            else cap_kind(e, max_depth, _depth) for e in t.elems))
    if isinstance(t, UnionType):
        return union_all(cap_kind(m, max_depth, _depth) for m in t.members)
    return t
