"""Post-inference passes: branch pruning, devirtualization, inlining and tuple elision.

Passes rewrite ``spec.code`` in place of the method body and re-annotate
between stages so later passes see fresh types.
"""

from __future__ import annotations

import itertools

from .dispatch import GenericFunction
from .ir import (Assign, Call, Const, ExprStmt, Goto, GotoIf, IRFunction, Invoke, Lambda, New,
                 Quote, Return, Var, dump)
from .lattice import subtype
from .types import TupleType, is_concrete
from .values import Builtin

PASSES = ("prune", "devirtualize", "inline", "elide", "devirtualize2")

# builtins with no effects and no failure modes on well-formed operands
PURE = {"tuple", "typeof", "is", "tuplelen", "nfields"}

_inline_ids = itertools.count(1)


class Label:
    """A position marker used while rebuilding a body."""

    __slots__ = ()


def optimize(ctx, spec):
    key = (id(spec.method), spec.argtypes)
    active = ctx.__dict__.setdefault("_optimizing", set())
    if key in active:
        return spec
    active.add(key)
    try:
        wanted = ctx.opts.passes
        spec.stages["lowered"] = spec.code
        for name in PASSES:
            if wanted is not None and name.rstrip("2") not in wanted:
                continue
            code = PASS_FNS[name](ctx, spec)
            if code is not spec.code:
                spec.code = code
                ctx.inferencer.annotate(spec)
            spec.stages[name] = spec.code
    finally:
        active.discard(key)
    return spec


# ---------------------------------------------------------------- helpers

def _is_builtin(ctx, code, e, name=None) -> bool:
    if type(e) is not Var or e.name in code.locals:
        return False
    v = ctx.globals.get(e.name)
    return isinstance(v, Builtin) and (name is None or v.name == name)


def _expr(s):
    if isinstance(s, (Assign, Return, ExprStmt)):
        return s.expr
    if isinstance(s, GotoIf):
        return s.cond
    return None


def _with_expr(s, e):
    if isinstance(s, Assign):
        return Assign(s.var, e)
    if isinstance(s, Return):
        return Return(e)
    if isinstance(s, ExprStmt):
        return ExprStmt(e)
    if isinstance(s, GotoIf):
        return GotoIf(e, s.label)
    return s


def _map_atoms(e, f):
    """Apply f to every atom read by expression e."""
    cls = type(e)
    if cls in (Var, Const):
        return f(e)
    if cls is Call:
        return Call(f(e.f), tuple(f(a) for a in e.args), e.splat)
    if cls is Invoke:
        return Invoke(e.method, e.argtypes, tuple(f(a) for a in e.args), e.name)
    if cls is New:
        return New(f(e.type), tuple(f(a) for a in e.args))
    return e


def _reads(e, out: dict):
    cls = type(e)
    if cls is Var:
        out[e.name] = out.get(e.name, 0) + 1
    elif cls is Call:
        _reads(e.f, out)
        for a in e.args:
            _reads(a, out)
    elif cls in (Invoke, New):
        if cls is New:
            _reads(e.type, out)
        for a in e.args:
            _reads(a, out)
    elif cls is Lambda:
        for c in e.captured:
            out[c] = out.get(c, 0) + 1


def _rebuild(code: IRFunction, expand) -> IRFunction:
    """Rebuild a body; ``expand(p, s)`` returns replacement statements.

    Replacement statements may use ``Label`` objects as statements (markers)
    and as goto targets; integer targets refer to the original indices.
    """
    out = []
    start = {}
    for p, s in enumerate(code.body, 1):
        start[p] = len(out)
        out.extend(expand(p, s))
    pos = {}
    real = []
    for s in out:
        if isinstance(s, Label):
            pos[id(s)] = len(real)
        else:
            real.append(s)
    # index in `real` of original statement p = number of real stmts before start[p]
    before = []
    n = 0
    for s in out:
        before.append(n)
        if not isinstance(s, Label):
            n += 1
    before.append(n)

    def target(l):
        if isinstance(l, Label):
            return pos[id(l)] + 1
        return before[start[l]] + 1

    body = []
    for s in real:
        if isinstance(s, Goto):
            body.append(Goto(target(s.label)))
        elif isinstance(s, GotoIf):
            body.append(GotoIf(s.cond, target(s.label)))
        else:
            body.append(s)
    return _new_code(code, body)


def _new_code(code, body) -> IRFunction:
    f = IRFunction(code.name, list(code.params), body, vararg=code.vararg,
                   static_params=list(code.static_params), globals=set(code.globals),
                   captured=list(code.captured), staged=code.staged)
    f.locals = set(code.locals) | {s.var for s in body if isinstance(s, Assign)
                                   and s.var not in code.globals}
    return f


def _single_defs(code) -> dict:
    defs = {}
    for p, s in enumerate(code.body, 1):
        if isinstance(s, Assign):
            defs[s.var] = p if s.var not in defs else None
    return defs


# ---------------------------------------------------------------- prune

def prune(ctx, spec):
    """Fold branches on conditions inferred constant, then drop dead code."""
    code = spec.code
    body = list(code.body)
    defs = _single_defs(code)
    changed = False
    for p, s in enumerate(body, 1):
        if not isinstance(s, GotoIf):
            continue
        c = spec.consts.get(p)
        if c is not True and c is not False and type(s.cond) is Var:
            d = defs.get(s.cond.name)
            if d:
                c = spec.consts.get(d)
        if c is True:
            body[p - 1] = Goto(p + 1)
            changed = True
            ctx.stats["pruned_branches"] += 1
        elif c is False:
            body[p - 1] = Goto(s.label)
            changed = True
            ctx.stats["pruned_branches"] += 1
    if not changed:
        return code
    return cleanup(_new_code(code, body))


def cleanup(code) -> IRFunction:
    """Remove unreachable statements and gotos to the next statement."""
    while True:
        body = code.body
        n = len(body)
        seen = set()
        work = [1]
        while work:
            p = work.pop()
            if p in seen or p > n:
                continue
            seen.add(p)
            s = body[p - 1]
            if isinstance(s, Goto):
                work.append(s.label)
            elif isinstance(s, GotoIf):
                work.extend((s.label, p + 1))
            elif not isinstance(s, Return):
                work.append(p + 1)
        drop = {p for p in range(1, n + 1) if p not in seen}
        for p in seen:
            s = body[p - 1]
            if isinstance(s, Goto) and _next_live(s.label, p, drop, n):
                drop.add(p)
                break
        if not drop:
            return code
        code = _rebuild(code, lambda p, s: [] if p in drop else [s])


def _next_live(label, p, drop, n) -> bool:
    q = p + 1
    while q in drop and q <= n:
        q += 1
    return label == q and q <= n


# ---------------------------------------------------------------- devirtualize

def devirtualize(ctx, spec):
    code = spec.code
    inf = ctx.inferencer
    changed = False

    def expand(p, s):
        nonlocal changed
        e = _expr(s)
        if type(e) is not Call:
            return [s]
        pre = []
        if e.splat:
            e2, pre = _expand_splat(spec, p, e)
            if e2 is None:
                return [s]
            e = e2
            changed = True
        call = spec.calls.get(p)
        gf, targ = call if call else (None, None)
        if gf is None or targ is None or not isinstance(targ, TupleType) or targ.vararg is not None:
            return pre + [_with_expr(s, e)]
        ms = gf.method_matches(targ, True)
        if len(ms) != 1 or not subtype(targ, ms[0][1].sig):
            return pre + [_with_expr(s, e)]
        isect, m, _, _ = ms[0]
        if m.staged:
            if not is_concrete(targ):
                return pre + [_with_expr(s, e)]
            m = ctx.expand_staged(m, targ)
            a = targ
        else:
            a = inf.widen_args(isect)
        changed = True
        ctx.stats["devirtualized_calls"] += 1
        return pre + [_with_expr(s, Invoke(m, a, e.args, gf.name))]

    new = _rebuild(code, expand)
    return new if changed else code


def _expand_splat(spec, p, e: Call):
    env = spec.envs[p - 1] if p - 1 < len(spec.envs) else None
    args, pre = [], []
    for a, sp in zip(e.args, e.splat):
        if not sp:
            args.append(a)
            continue
        if type(a) is Const and isinstance(a.value, tuple):
            args.extend(Const(x) for x in a.value)
            continue
        t = env.get(a.name) if (env and type(a) is Var) else None
        if not isinstance(t, TupleType) or t.vararg is not None:
            return None, []
        for k in range(1, len(t.elems) + 1):
            v = f"#sp{next(_inline_ids)}"
            pre.append(Assign(v, Call(Var("tupleref"), (a, Const(k)))))
            args.append(Var(v))
    return Call(e.f, tuple(args)), pre


# ---------------------------------------------------------------- inline

def inline(ctx, spec):
    code = spec.code
    budget = ctx.opts.inline_budget
    changed = False

    def expand(p, s):
        nonlocal changed
        e = _expr(s)
        if type(e) is not Invoke:
            return [s]
        m = e.method
        if m is spec.method or (m.origin is not None and m.origin is spec.method):
            return [s]
        active = ctx.__dict__.get("_optimizing", ())
        if (id(m), e.argtypes) in active:
            return [s]
        callee = ctx.specialize(m, e.argtypes)
        cc = callee.code
        if len(cc.body) > budget or not _inlinable(cc, callee, m):
            return [s]
        changed = True
        ctx.stats["inlined_calls"] += 1
        return _splice(s, e, cc, callee)

    new = _rebuild(code, expand)
    return cleanup(new) if changed else code


def _inlinable(cc, callee, m) -> bool:
    if len(callee.sparams) != len(m.sparams):
        return False
    for s in cc.body:
        if isinstance(s, Assign) and s.var not in cc.locals:
            return False
        e = _expr(s)
        if isinstance(e, (Lambda, Quote)):
            return False
    return True


def _splice(s, e: Invoke, cc, callee) -> list:
    k = next(_inline_ids)
    rename = {name: f"#i{k}_{name.lstrip('#')}" for name in cc.locals}
    consts = {name: Const(v) for name, v in callee.sparams.items()}

    def atom(a):
        if type(a) is Var:
            if a.name in consts:
                return consts[a.name]
            if a.name in rename:
                return Var(rename[a.name])
        return a

    out = []
    params = cc.params
    nfix = len(params) - 1 if cc.vararg else len(params)
    for i in range(nfix):
        out.append(Assign(rename[params[i]], e.args[i]))
    if cc.vararg:
        out.append(Assign(rename[params[-1]], Call(Var("tuple"), tuple(e.args[nfix:]))))
    if isinstance(s, Assign):
        res = s.var
    else:
        res = f"#i{k}_result"
    end = Label()
    labels = {}
    n = len(cc.body)
    for q in range(1, n + 2):
        labels[q] = Label()
    for q, t in enumerate(cc.body, 1):
        out.append(labels[q])
        if isinstance(t, Return):
            out.append(Assign(res, _map_atoms(t.expr, atom)))
            if q != n:
                out.append(Goto(end))
        elif isinstance(t, Goto):
            out.append(Goto(labels[t.label]))
        elif isinstance(t, GotoIf):
            out.append(GotoIf(_map_atoms(t.cond, atom), labels[t.label]))
        elif isinstance(t, Assign):
            out.append(Assign(rename.get(t.var, t.var), _map_atoms(t.expr, atom)))
        else:
            out.append(ExprStmt(_map_atoms(t.expr, atom)))
    out.append(labels[n + 1])
    out.append(end)
    if isinstance(s, Return):
        out.append(Return(Var(res)))
    elif isinstance(s, GotoIf):
        out.append(GotoIf(Var(res), s.label))
    return out


# ---------------------------------------------------------------- elide

def elide(ctx, spec):
    """Forward tuple components to their tupleref uses within a block; drop dead tuples."""
    code = spec.code
    body = list(code.body)
    n = len(body)
    loc = code.locals
    leaders = {1}
    for p, s in enumerate(body, 1):
        if isinstance(s, (Goto, GotoIf)):
            leaders.add(s.label)
        if isinstance(s, (Goto, GotoIf, Return)):
            leaders.add(p + 1)
    copies: dict = {}
    tuples: dict = {}
    changed = False

    def kill(v):
        copies.pop(v, None)
        tuples.pop(v, None)
        for x in [x for x, a in copies.items() if type(a) is Var and a.name == v]:
            del copies[x]
        for x in [x for x, t in tuples.items() if any(type(a) is Var and a.name == v for a in t)]:
            del tuples[x]

    def sub(a):
        if type(a) is Var and a.name in copies:
            return copies[a.name]
        return a

    for p in range(1, n + 1):
        if p in leaders:
            copies.clear()
            tuples.clear()
        s = body[p - 1]
        e = _expr(s)
        if e is None:
            continue
        e2 = _map_atoms(e, sub) if not isinstance(e, Lambda) else e
        if type(e2) is Call and not e2.splat and _is_builtin(ctx, code, e2.f, "tupleref") \
                and len(e2.args) == 2 and type(e2.args[0]) is Var \
                and e2.args[0].name in tuples and type(e2.args[1]) is Const:
            comps = tuples[e2.args[0].name]
            i = e2.args[1].value
            if isinstance(i, int) and not isinstance(i, bool) and 1 <= i <= len(comps):
                e2 = comps[i - 1]
        if e2 != e:
            body[p - 1] = s = _with_expr(s, e2)
            changed = True
        if isinstance(s, Assign):
            v = s.var
            kill(v)
            if v in loc:
                if type(e2) in (Const,) or (type(e2) is Var and e2.name in loc and e2.name != v):
                    copies[v] = e2
                elif type(e2) is Call and not e2.splat and _is_builtin(ctx, code, e2.f, "tuple") \
                        and all(type(a) is Const or (type(a) is Var and a.name in loc
                                                     and a.name != v) for a in e2.args):
                    tuples[v] = e2.args
    code2 = _new_code(code, body) if changed else code
    code3 = dce(ctx, code2)
    return code3


def dce(ctx, code):
    """Remove effect-free assignments to locals that are never read."""
    params = set(code.params)
    while True:
        reads: dict = {}
        for s in code.body:
            e = _expr(s)
            if e is not None:
                _reads(e, reads)
        drop = set()
        for p, s in enumerate(code.body, 1):
            if isinstance(s, Assign):
                if s.var not in code.locals or reads.get(s.var):
                    continue
            elif not isinstance(s, ExprStmt):
                continue
            e = s.expr
            if _pure(ctx, code, e, params):
                drop.add(p)
                if type(e) is Call and _is_builtin(ctx, code, e.f, "tuple"):
                    ctx.stats["elided_tuples"] += 1
        if not drop:
            return code
        code = _rebuild(code, lambda p, s: [] if p in drop else [s])


def _pure(ctx, code, e, params) -> bool:
    if type(e) is Const:
        return True
    if type(e) is Var:
        if e.name not in code.locals:
            return e.name in ctx.consts and e.name in ctx.globals
        return e.name.startswith("#") or e.name in params
    if type(e) is Call and not e.splat and _is_builtin(ctx, code, e.f):
        return ctx.globals[e.f.name].name in PURE
    return False


PASS_FNS = {
    "prune": prune,
    "devirtualize": devirtualize,
    "inline": inline,
    "elide": elide,
    "devirtualize2": devirtualize,
}


# ---------------------------------------------------------------- reporting

def dynamic_call_sites(ctx, code) -> int:
    """Calls left for run-time dispatch: generic or unknown callees."""
    k = 0
    for s in code.body:
        e = _expr(s)
        if type(e) is Call and not _is_builtin(ctx, code, e.f):
            k += 1
    return k


def tuple_sites(ctx, code) -> int:
    k = 0
    for s in code.body:
        e = _expr(s)
        if type(e) is Call and _is_builtin(ctx, code, e.f, "tuple"):
            k += 1
    return k


def dump_stage(spec, stage: str) -> str:
    code = spec.stages.get(stage)
    if code is None:
        return ""
    return dump(code)
