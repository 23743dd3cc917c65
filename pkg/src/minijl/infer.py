"""Dataflow type inference over IR functions.

``infer_body`` is the per-function worklist fixpoint; ``infer_call`` is the
interprocedural driver with memoization and recursion marking. Environments
map local names to types; an absent name is Undef.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dispatch import GenericFunction, MethodDef
from .ir import Assign, Call, Const, ExprStmt, Goto, GotoIf, Invoke, Lambda, New, Quote, Return, Var
from .lattice import DataType, intersect, intersect_full, join, subtype, type_equal, union_all
from .types import (BITS, COMPOSITE, AnyType, Apply, Bottom, Kind, TupleType, TypeTerm, TypeVar,
                    UnionType, Vararg, as_type, full_params, has_vars, is_concrete,
                    is_type_value, substitute, type_as_value)
from .values import Builtin, Closure, typeof_value

NOCONST = object()
# environment key holding the set of possibly-undefined names
MAYBE = None


@dataclass(eq=False)
class Frame:
    method: object
    key: tuple
    R: TypeTerm = Bottom
    rec: bool = False


@dataclass
class BodyResult:
    rettype: TypeTerm
    types: dict = field(default_factory=dict)        # pc -> expression type
    consts: dict = field(default_factory=dict)       # pc -> constant value
    calls: dict = field(default_factory=dict)        # pc -> (callee, t_arg)
    envs: list = field(default_factory=list)         # pc-1 -> Gamma or None
    undef_reads: set = field(default_factory=set)


def canon(t, names=None):
    """Structural key for a type term; type variables compare by position."""
    if names is None:
        names = {}
    if isinstance(t, TypeVar):
        k = names.get(id(t))
        if k is None:
            k = names[id(t)] = len(names)
            return ("var", k, canon(t.ub, names))
        return ("var", k)
    if isinstance(t, TupleType):
        return ("tuple",) + tuple(canon(e, names) for e in t.elems)
    if isinstance(t, Vararg):
        return ("...", canon(t.elem, names))
    if isinstance(t, UnionType):
        return ("union",) + tuple(canon(m, names) for m in t.members)
    if isinstance(t, Kind):
        return ("kind", canon(t.inner, names))
    if isinstance(t, Apply):
        return ("apply", id(t.name)) + tuple(canon(p, names) for p in t.params)
    return t


# ---------------------------------------------------------------- environments

def env_join(a: dict | None, b: dict, cutoff: int) -> dict:
    if a is None:
        return b
    out = {}
    maybe = set(a.get(MAYBE, ())) | set(b.get(MAYBE, ()))
    for k, t in a.items():
        if k is MAYBE:
            continue
        u = b.get(k)
        if u is None:
            out[k] = t
            maybe.add(k)
        else:
            out[k] = join(t, u, cutoff)
    for k, u in b.items():
        if k is not MAYBE and k not in a:
            out[k] = u
            maybe.add(k)
    if maybe:
        out[MAYBE] = frozenset(maybe)
    return out


def env_le(a: dict, b: dict | None) -> bool:
    if b is None:
        return False
    for k, t in a.items():
        if k is MAYBE:
            continue
        u = b.get(k)
        if u is None or (t is not u and not subtype(t, u)):
            return False
    ma = a.get(MAYBE)
    if ma and not ma <= b.get(MAYBE, frozenset()):
        return False
    # a name defined in b but undefined in a would become maybe-undef on join
    for k in b:
        if k is not MAYBE and k not in a and k not in b.get(MAYBE, ()):
            return False
    return True


# ---------------------------------------------------------------- the engine

class Inferencer:
    def __init__(self, ctx):
        self.ctx = ctx
        self.recall: dict = {}
        self.incomplete: dict = {}
        self.stack: list = []
        self._typeof_vars: dict = {}
        self._sparam_vars: dict = {}
        self.body_runs = 0

    def flush(self):
        self.recall.clear()
        self.incomplete.clear()

    @property
    def opts(self):
        return self.ctx.opts

    # ---- driver

    def annotate(self, spec):
        """Infer spec.method at spec.argtypes and attach per-statement annotations."""
        m, a = spec.method, spec.argtypes
        key = self._key(m, a)
        limit = max(4, self.opts.union_cutoff * max(1, len(self.recall)))
        saved = self.stack
        self.stack = []
        try:
            for _ in range(limit):
                self.infer_call(m, a)
                if not self.incomplete.get(key):
                    break
            else:
                self.recall[key] = AnyType
                self.incomplete[key] = False
            final = self.infer_body(spec.code, m, a, Frame(m, key), record=True)
        finally:
            self.stack = saved
        prev = self.recall.get(key)
        spec.rettype = final.rettype
        if prev is not None and not (subtype(final.rettype, prev)):
            # should not happen: the verification pass found a larger result
            self.ctx.stats["inference_unstable"] += 1
            spec.rettype = join(prev, final.rettype, self.opts.union_cutoff)
        spec.types = final.types
        spec.consts = final.consts
        spec.calls = final.calls
        spec.envs = final.envs
        spec.undef_reads = final.undef_reads
        spec.sparams = self._const_sparams(m, a)
        return spec

    def result(self, m, a) -> TypeTerm:
        r = self.infer_call(m, a)
        return r

    def _key(self, m, a):
        return (id(m), canon(a))

    def infer_call(self, m: MethodDef, a: TupleType) -> TypeTerm:
        key = self._key(m, a)
        R = Bottom
        if key in self.recall:
            R = self.recall[key]
            if not self.incomplete.get(key):
                return R
        for i in range(len(self.stack) - 1, -1, -1):
            f = self.stack[i]
            if f.key == key:
                for g in self.stack[i:]:
                    g.rec = True
                return f.R
        if len(self.stack) > 400:
            return AnyType
        frame = Frame(m, key, R)
        self.stack.append(frame)
        try:
            self.infer_body(m.code, m, a, frame)
        finally:
            self.stack.pop()
        self.recall[key] = frame.R
        self.incomplete[key] = frame.rec and not type_equal(R, frame.R)
        return frame.R

    # ---- one function body

    def infer_body(self, code, m, a: TupleType, S: Frame, record=False) -> BodyResult:
        self.body_runs += 1
        self.ctx.stats["inference_runs"] += 1
        cutoff = self.opts.union_cutoff
        body = code.body
        n = len(body)
        loc = code.locals
        gamma: list = [None] * (n + 2)
        gamma[1] = self._initial_env(code, m, a)
        res = BodyResult(Bottom)
        W = {1}
        Pr = set()
        while W:
            p = min(W)
            while True:
                W.discard(p)
                s = body[p - 1]
                env = gamma[p]
                new, t, c, call = self.interpret(s, env, loc, res)
                if record:
                    self._record(res, p, t, c, call)
                if S.rec:
                    Pr.add(p)
                    S.rec = False
                p2 = p + 1
                cls = type(s)
                if cls is Goto:
                    p2 = s.label
                elif cls is GotoIf:
                    l = s.label
                    if not env_le(new, gamma[l]):
                        W.add(l)
                        gamma[l] = env_join(gamma[l], new, cutoff)
                elif cls is Return:
                    p2 = n + 1
                    if not subtype(t, S.R):
                        S.R = join(S.R, t, cutoff)
                        W |= Pr
                if p2 <= n and not env_le(new, gamma[p2]):
                    gamma[p2] = env_join(gamma[p2], new, cutoff)
                    p = p2
                else:
                    # nothing new flows to the successor
                    break
        S.rec = bool(Pr)
        res.rettype = S.R
        if record:
            res.envs = gamma[1:n + 1]
        return res

    def _record(self, res, p, t, c, call):
        old = res.types.get(p)
        res.types[p] = t if old is None else join(old, t, self.opts.union_cutoff)
        if p in res.consts:
            if c is NOCONST or not _same_const(res.consts[p], c):
                res.consts[p] = NOCONST
        else:
            res.consts[p] = c
        if call is not None:
            prev = res.calls.get(p)
            if prev is None:
                res.calls[p] = call
            elif prev[0] is call[0]:
                res.calls[p] = (call[0], _join_targ(prev[1], call[1], self.opts.union_cutoff))
            else:
                res.calls[p] = (None, None)

    def _initial_env(self, code, m, a: TupleType) -> dict:
        env = {}
        params = code.params
        nfix = len(params) - 1 if code.vararg else len(params)
        for i in range(nfix):
            env[params[i]] = _elem(a, i)
        if code.vararg:
            rest = list(a.elems[nfix:])
            env[params[-1]] = TupleType(tuple(rest))
        if m is not None and m.sparams:
            r, sub, exact = intersect_full(a, m.sig)
            for v in m.sparams:
                val = sub.get(v)
                if val is not None and v in exact and not has_vars(val):
                    env[v.name] = typeof_value(type_as_value(val), self.ctx.tys) \
                        if isinstance(val, TypeTerm) else typeof_value(val, self.ctx.tys)
                else:
                    env[v.name] = self._sparam_type(m, v, val)
        for c in getattr(code, "captured", ()):
            env.setdefault(c, AnyType)
        return env

    def _sparam_type(self, m, v, val):
        if isinstance(val, int):
            return self.ctx.tys.Int64
        ub = v.ub
        if isinstance(val, TypeTerm) and val is not AnyType and not isinstance(val, TypeVar):
            ub = val
        key = (id(m), id(v), canon(ub))
        t = self._sparam_vars.get(key)
        if t is None:
            t = self._sparam_vars[key] = Kind(TypeVar(v.name, ub))
        return t

    def _const_sparams(self, m, a) -> dict:
        if not m.sparams:
            return {}
        r, sub, exact = intersect_full(a, m.sig)
        out = {}
        for v in m.sparams:
            val = sub.get(v)
            if val is not None and v in exact and not has_vars(val):
                out[v.name] = type_as_value(val) if isinstance(val, TypeTerm) else val
        return out

    # ---- statements and expressions

    def interpret(self, s, env, loc, res):
        """(new environment, expression type, constant, call info) for one statement."""
        cls = type(s)
        if cls is Goto:
            return env, None, NOCONST, None
        e = s.cond if cls is GotoIf else s.expr
        if e is None:
            return env, None, NOCONST, None
        t, c, call = self.eval(e, env, loc, res)
        if isinstance(s, Assign) and s.var in loc:
            new = dict(env)
            new[s.var] = t
            mb = new.get(MAYBE)
            if mb and s.var in mb:
                new[MAYBE] = mb - {s.var}
            return new, t, c, call
        return env, t, c, call

    def eval(self, e, env, loc, res):
        """(type, constant, call info)."""
        cls = type(e)
        if cls is Const:
            return self.const_type(e.value), e.value, None
        if cls is Var:
            return self.eval_var(e.name, env, loc, res) + (None,)
        if cls is Call:
            return self.eval_call(e, env, loc, res)
        if cls is Invoke:
            targs = [self.eval_atom(x, env, loc, res)[0] for x in e.args]
            if any(t is Bottom for t in targs):
                return Bottom, NOCONST, None
            m = e.method
            if m.staged:
                return AnyType, NOCONST, None
            return self.infer_call(m, e.argtypes), NOCONST, None
        if cls is New:
            tt, tc = self.eval_atom(e.type, env, loc, res)
            for x in e.args:
                self.eval_atom(x, env, loc, res)
            return self.new_type(tt, tc), NOCONST, None
        if cls is Quote:
            return self.ctx.tys.Expr, NOCONST, None
        if cls is Lambda:
            return self.ctx.tys.Function, NOCONST, None
        return AnyType, NOCONST, None

    def const_type(self, v):
        return typeof_value(v, self.ctx.tys)

    def eval_atom(self, e, env, loc, res):
        if type(e) is Const:
            return self.const_type(e.value), e.value
        return self.eval_var(e.name, env, loc, res)

    def eval_var(self, name, env, loc, res):
        if name in loc:
            t = env.get(name)
            if t is None:
                res.undef_reads.add(name)
                return Bottom, NOCONST
            mb = env.get(MAYBE)
            if mb and name in mb:
                res.undef_reads.add(name)
            return t, _const_of(t)
        g = self.ctx.globals
        if name in self.ctx.consts and name in g:
            v = g[name]
            return self.const_type(v), v
        return AnyType, NOCONST

    def eval_call(self, e: Call, env, loc, res):
        ft, fc = self.eval_atom(e.f, env, loc, res)
        args = [self.eval_atom(x, env, loc, res) for x in e.args]
        if any(t is Bottom for t, _ in args) or ft is Bottom:
            return Bottom, NOCONST, None
        if e.splat:
            targ, consts = self._spliced(args, e.splat)
        else:
            targ = TupleType(tuple(t for t, _ in args))
            consts = [c for _, c in args]
        if isinstance(fc, Builtin):
            fn = TRANSFER.get(fc.name)
            if fn is None or targ.vararg is not None:
                return AnyType, NOCONST, None
            t, c = fn(self, list(targ.elems), consts)
            return t, c, None
        gf = None
        if isinstance(fc, GenericFunction):
            gf = fc
        elif isinstance(fc, Apply):
            return self.call_type(fc, targ)
        if gf is None:
            return AnyType, NOCONST, None
        t = self.infer_generic(gf, targ)
        return t, _const_of(t), (gf, targ)

    def _spliced(self, args, flags):
        elems = []
        tail = None
        for (t, c), sp in zip(args, flags):
            if tail is not None:
                tail = union_all([tail, t if not sp else AnyType])
                continue
            if not sp:
                elems.append(t)
            elif isinstance(t, TupleType):
                elems.extend(t.fixed)
                if t.vararg is not None:
                    tail = t.vararg
            else:
                tail = AnyType
        if tail is not None:
            elems.append(Vararg(tail))
        return TupleType(tuple(elems)), [NOCONST] * len(elems)

    def call_type(self, t: Apply, targ: TupleType):
        tn = t.name
        if tn.kind == COMPOSITE:
            if t.params and len(t.params) == len(tn.formals):
                return (t if is_concrete(t) else AnyType), NOCONST, None
            gf = tn.constructors
            r = self.infer_generic(gf, targ)
            return r, NOCONST, (gf, targ)
        conv = self.ctx.globals.get("convert")
        if len(targ.elems) == 1 and isinstance(conv, GenericFunction):
            ta = TupleType((Kind(t),) + targ.elems)
            return self.infer_generic(conv, ta), NOCONST, None
        return Bottom, NOCONST, None

    def new_type(self, tt, tc):
        if isinstance(tc, Apply) and tc.name.kind == COMPOSITE and is_concrete(tc):
            return tc
        if isinstance(tt, Kind):
            inner = tt.inner
            if isinstance(inner, TypeVar):
                inner = inner.ub
            if isinstance(inner, Apply):
                return inner if not has_vars(inner) else Apply(inner.name)
        return AnyType

    # ---- the generic call equation

    def infer_generic(self, gf: GenericFunction, targ: TupleType) -> TypeTerm:
        stats = self.ctx.stats
        stats["inferred_calls"] += 1
        if any(e is Bottom for e in targ.elems):
            return Bottom
        cutoff = self.opts.union_cutoff
        matches = gf.method_matches(targ, self.opts.early_stop)
        stats["methods_considered"] += len(matches)
        r = Bottom
        for isect, m, sub, exact in matches:
            a = self.widen_args(isect)
            if m.staged:
                if is_concrete(isect):
                    try:
                        gm = self.ctx.expand_staged(m, isect)
                    except Exception:
                        return AnyType
                    t = self.infer_call(gm, isect)
                else:
                    t = AnyType
            else:
                t = self.infer_call(m, a)
            r = join(r, t, cutoff)
            if r is AnyType:
                return AnyType
        return r

    def widen_args(self, a):
        from .lattice import cap_kind, cap_tuple
        if not isinstance(a, TupleType):
            return a
        a = cap_kind(a, self.opts.kind_depth + 1)
        return cap_tuple(a, self.opts.tuple_depth + 1, self.opts.tuple_len)

    def typeof_type(self, t):
        if t is Bottom:
            return Bottom
        if isinstance(t, TupleType):
            # tuple types are tuples of types at run time
            if t.vararg is not None:
                return TupleType((Vararg(AnyType),))
            return TupleType(tuple(self.typeof_type(e) for e in t.elems))
        if is_concrete(t):
            return Kind(t)
        key = canon(t)
        v = self._typeof_vars.get(key)
        if v is None:
            v = self._typeof_vars[key] = Kind(TypeVar("T", _var_free_bound(t)))
        return v


def _var_free_bound(t):
    if not has_vars(t):
        return t
    if isinstance(t, Apply):
        return Apply(t.name)
    return AnyType


def _elem(a: TupleType, i: int):
    fixed = a.fixed
    if i < len(fixed):
        return fixed[i]
    va = a.vararg
    return va if va is not None else Bottom


def _join_targ(a, b, cutoff):
    if a is None or b is None or len(a.elems) != len(b.elems):
        return None
    out = []
    for x, y in zip(a.elems, b.elems):
        if isinstance(x, Vararg) or isinstance(y, Vararg):
            if not (isinstance(x, Vararg) and isinstance(y, Vararg)):
                return None
            out.append(Vararg(join(x.elem, y.elem, cutoff)))
        else:
            out.append(join(x, y, cutoff))
    return TupleType(tuple(out))


def _const_of(t):
    """Singleton types determine their value."""
    if isinstance(t, Kind) and not has_vars(t.inner) and not isinstance(t.inner, Vararg):
        return type_as_value(t.inner)
    if isinstance(t, TupleType) and t.vararg is None:
        cs = tuple(_const_of(e) for e in t.elems)
        if all(c is not NOCONST for c in cs):
            return cs
    return NOCONST


def _same_const(a, b) -> bool:
    if a is NOCONST or b is NOCONST:
        return a is b
    if type(a) is not type(b):
        return False
    if isinstance(a, TypeTerm):
        return type_equal(a, b)
    try:
        return a is b or bool(a == b)
    except Exception:
        return False


# ---------------------------------------------------------------- transfer functions

TRANSFER: dict = {}


def transfer(*names):
    def deco(fn):
        for n in names:
            TRANSFER[n] = fn
        return fn
    return deco


def _tys(inf):
    return inf.ctx.tys


def _type_const(c):
    if c is not NOCONST and is_type_value(c):
        return as_type(c)
    return None


@transfer("is")
def _t_is(inf, ts, cs):
    if len(ts) == 2 and intersect(ts[0], ts[1]) is Bottom:
        return _tys(inf).Bool, False
    return _tys(inf).Bool, NOCONST


@transfer("isa")
def _t_isa(inf, ts, cs):
    b = _tys(inf).Bool
    if len(ts) == 2:
        t = _type_const(cs[1])
        if t is not None:
            if subtype(ts[0], t):
                return b, True
            if intersect(ts[0], t) is Bottom:
                return b, False
    return b, NOCONST


@transfer("issubtype", "<:")
def _t_issubtype(inf, ts, cs):
    b = _tys(inf).Bool
    if len(cs) == 2:
        x, y = _type_const(cs[0]), _type_const(cs[1])
        if x is not None and y is not None:
            return b, subtype(x, y)
    return b, NOCONST


@transfer("typeof")
def _t_typeof(inf, ts, cs):
    if len(ts) != 1:
        return Bottom, NOCONST
    k = inf.typeof_type(ts[0])
    return k, _const_of(k)


@transfer("typeassert")
def _t_typeassert(inf, ts, cs):
    if len(ts) != 2:
        return Bottom, NOCONST
    t = _type_const(cs[1])
    if t is None:
        return ts[0], cs[0]
    r = intersect(ts[0], t)
    return r, (cs[0] if r is not Bottom else NOCONST)


@transfer("tuple")
def _t_tuple(inf, ts, cs):
    from .lattice import cap_tuple
    o = inf.opts
    t = cap_tuple(TupleType(tuple(ts)), o.tuple_depth, o.tuple_len)
    if all(c is not NOCONST and is_type_value(c) for c in cs) and cs:
        return t, tuple(cs)
    return t, NOCONST


@transfer("tupleref")
def _t_tupleref(inf, ts, cs):
    if len(ts) != 2:
        return Bottom, NOCONST
    t, i = ts[0], cs[1]
    if not isinstance(t, TupleType):
        return AnyType, NOCONST
    if isinstance(i, int) and not isinstance(i, bool):
        if i < 1:
            return Bottom, NOCONST
        r = _elem(t, i - 1)
        c = cs[0][i - 1] if isinstance(cs[0], tuple) and i <= len(cs[0]) else _const_of(r)
        return r, c
    members = list(t.fixed) + ([t.vararg] if t.vararg is not None else [])
    return union_all(members), NOCONST


@transfer("tuplelen")
def _t_tuplelen(inf, ts, cs):
    t = ts[0] if ts else None
    if isinstance(t, TupleType) and t.vararg is None:
        return _tys(inf).Int64, len(t.elems)
    return _tys(inf).Int64, NOCONST


@transfer("getfield")
def _t_getfield(inf, ts, cs):
    if len(ts) != 2:
        return Bottom, NOCONST
    t, f = ts[0], cs[1]
    if not isinstance(t, Apply) or t.name.kind != COMPOSITE:
        return AnyType, NOCONST
    tn = t.name
    if isinstance(f, str):
        if f not in tn.field_names:
            return Bottom, NOCONST
        k = tn.field_names.index(f)
    elif isinstance(f, int) and not isinstance(f, bool) and 1 <= f <= len(tn.field_names):
        k = f - 1
    else:
        return AnyType, NOCONST
    ft = tn.field_types[k]
    if tn.formals:
        ps = full_params(t)
        sub = {fv: (p if not isinstance(p, TypeVar) else p.ub)
               for fv, p in zip(tn.formals, ps)}
        ft = substitute(ft, sub)
    return ft, _const_of(ft)


@transfer("nfields", "string_length")
def _t_int(inf, ts, cs):
    return _tys(inf).Int64, NOCONST


@transfer("apply_type")
def _t_apply_type(inf, ts, cs):
    if cs and all(c is not NOCONST for c in cs):
        try:
            from .builtins import apply_type
            v = apply_type(inf.ctx, *cs)
            k = typeof_value(v, inf.ctx.tys)
            return k, _const_of(k)
        except Exception:
            return Bottom, NOCONST
    base = _type_const(cs[0]) if cs else None
    if isinstance(base, Apply):
        return inf.typeof_type(Apply(base.name)), NOCONST
    return AnyType, NOCONST


@transfer("Union")
def _t_union(inf, ts, cs):
    if cs and all(_type_const(c) is not None for c in cs):
        u = union_all(_type_const(c) for c in cs)
        k = typeof_value(type_as_value(u), inf.ctx.tys)
        return k, _const_of(k)
    return AnyType, NOCONST


@transfer("applicable")
def _t_applicable(inf, ts, cs):
    b = _tys(inf).Bool
    if not cs:
        return b, NOCONST
    gf = inf.ctx.callable_gf(cs[0]) if cs[0] is not NOCONST else None
    if gf is None:
        return b, NOCONST
    targ = TupleType(tuple(ts[1:]))
    if is_concrete(targ):
        # effect-free: fold over the current method table
        m, _ = gf.slow_lookup(targ)
        return b, m is not None
    if not any(intersect(targ, m.sig) is not Bottom for m in gf.methods):
        return b, False
    return b, NOCONST


@transfer("error")
def _t_error(inf, ts, cs):
    return Bottom, NOCONST


@transfer("string", "string_concat")
def _t_string(inf, ts, cs):
    return _tys(inf).String, NOCONST


@transfer("print", "println")
def _t_print(inf, ts, cs):
    return _tys(inf).Nothing, NOCONST


@transfer("add_int", "sub_int", "mul_int", "sdiv_int", "srem_int", "and_int", "or_int",
          "xor_int", "neg_int", "shl_int", "ashr_int")
def _t_int_arith(inf, ts, cs):
    t = ts[0] if ts else AnyType
    if isinstance(t, Apply) and t.name.kind == BITS:
        return t, NOCONST
    return AnyType, NOCONST


@transfer("eq_int", "slt_int", "sle_int", "eq_float", "lt_float", "le_float", "not_bool")
def _t_cmp(inf, ts, cs):
    return _tys(inf).Bool, NOCONST


@transfer("add_float", "sub_float", "mul_float", "div_float", "pow_float", "neg_float",
          "sqrt_float", "floor_float", "sitofp")
def _t_float(inf, ts, cs):
    return _tys(inf).Float64, NOCONST


@transfer("fptosi", "trunc_int", "sext_int")
def _t_convert_int(inf, ts, cs):
    t = _type_const(cs[0]) if cs else None
    if isinstance(t, Apply) and t.name.kind == BITS:
        return t, NOCONST
    return AnyType, NOCONST
