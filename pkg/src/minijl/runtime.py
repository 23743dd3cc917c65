"""The evaluation context: globals, method definition, dispatch and the IR interpreter."""

from __future__ import annotations

import io
import sys
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .builtins import BUILTINS
from .dispatch import CacheEntry, GenericFunction, MethodDef
from .frontend import ParseError, lower_toplevel
from .frontend.lower import MethodItem, ThunkItem, TypeItem, lower_quote_body
from .frontend.parser import Node
from .ir import Assign, Call, Const, ExprStmt, Goto, GotoIf, Invoke, Lambda, New, Quote, Return, Var
from .lattice import DataType, match, subtype, union_all
from .types import (ABSTRACT, ANY, BITS, COMPOSITE, TUPLE_ANY, AnyType, Apply, Bottom,
                    Kind, TupleType, TypeError_, TypeRegistry, TypeTerm, TypeVar, Vararg,
                    as_type, free_vars, is_concrete, is_type_value, show, substitute, type_as_value)
from .values import (NOTHING, Builtin, Closure, CodeValue, MiniError, Struct, Types,
                     show_value, typeof_value)

EMPTY = TupleType(())


@dataclass
class Options:
    heuristics: bool = True
    infer: bool = True
    optimize: bool = True
    union_cutoff: int = 4
    tuple_depth: int = 3
    tuple_len: int = 8
    kind_depth: int = 2
    early_stop: bool = True
    inline_budget: int = 20
    # compare every run-time value against its inferred annotation
    check_inference: bool = False
    # compare every cached dispatch against the sorted-table scan
    dispatch_oracle: bool = False
    boot: bool = True
    # optimizer passes to run; None means all
    passes: tuple | None = None


@dataclass(eq=False)
class Specialization:
    method: MethodDef
    argtypes: TupleType
    code: object
    rettype: TypeTerm = AnyType
    # statement index -> inferred type of the statement's expression
    types: dict = field(default_factory=dict)
    # static parameters fixed by the entry signature, name -> value
    sparams: dict = field(default_factory=dict)
    # IR after each optimizer pass, for --dump-ir --after
    stages: dict = field(default_factory=dict)


class Context:
    def __init__(self, options: Options | None = None, out=None, diag=None):
        from .infer import Inferencer
        self.opts = options or Options()
        self.out = out if out is not None else sys.stdout
        self.diag = diag if diag is not None else sys.stderr
        self.reg = TypeRegistry()
        self.tys = Types(self.reg)
        self.globals: dict = {}
        # names whose value inference may rely on
        self.consts: set = set()
        self.gfs: dict = {}
        self.lambdas: dict = {}
        self.stats: Counter = Counter()
        self.violations: list = []
        self.oracle_mismatches: list = []
        self.warnings: list = []
        self.thunk_specs: list = []
        self.inferencer = Inferencer(self)
        self._install_globals()
        self.load_boot(full=self.opts.boot)

    # ------------------------------------------------------------ setup

    def _install_globals(self):
        g = self.globals
        for name, fn in BUILTINS.items():
            g[name] = Builtin(name, fn, True)
        g["Any"] = AnyType
        g["None"] = Bottom
        g["ANY"] = ANY
        g["Type"] = DataType
        g["DataType"] = DataType
        g["Tuple"] = TUPLE_ANY
        g["nothing"] = NOTHING
        for n in ("Function", "Nothing", "Expr"):
            g[n] = self.reg.lookup(n)
        self.consts.update(g)

    def load_boot(self, full: bool = True):
        pkg = resources.files("minijl") / "boot"
        manifest = (pkg / "MANIFEST").read_text().split()
        for i, name in enumerate(manifest):
            if i > 0 and not full:
                break
            self.eval_source((pkg / name).read_text(), filename=name)
        self.stats.clear()

    # ------------------------------------------------------------ helpers

    def typeof(self, v) -> TypeTerm:
        return typeof_value(v, self.tys)

    def argtuple(self, args) -> TupleType:
        t = TupleType(tuple(typeof_value(a, self.tys) for a in args))
        return self.reg.consed(t) if is_concrete(t) else t

    def _key(self, argt: TupleType):
        if not argt.elems:
            return None
        first = argt.elems[0]
        return self.reg.intern(first) if is_concrete(first) else None

    def callable_gf(self, f):
        if isinstance(f, GenericFunction):
            return f
        if isinstance(f, Apply) and f.name.constructors is not None:
            return f.name.constructors
        return None

    def all_methods(self):
        for gf in self.all_gfs():
            yield from gf.methods

    def all_gfs(self):
        yield from self.gfs.values()
        for tn in self.reg.names.values():
            if tn.constructors is not None:
                yield tn.constructors

    def invalidate(self):
        """Adding a method may change any earlier inference result."""
        for gf in self.all_gfs():
            gf.flush()
            for m in gf.methods:
                m.specs.clear()
                for gm in m.expansions.values():
                    gm.specs.clear()
        self.inferencer.flush()

    # ------------------------------------------------------------ types in declarations

    def eval_type(self, n: Node, scope: dict):
        h = n.head
        if h == "lit":
            v = n.args[0]
            if isinstance(v, int):
                return v
            raise MiniError(f"invalid type parameter {show_value(v)}")
        if h == "id":
            name = n.args[0]
            if name in scope:
                return scope[name]
            if name not in self.globals:
                raise MiniError(f"{name} not defined")
            v = self.globals[name]
            if not is_type_value(v):
                raise MiniError(f"{name} is not a type")
            return as_type(v)
        if h == "curly":
            base = self.eval_type(n.args[0], scope)
            params = [self.eval_type(p, scope) for p in n.args[1:]]
            if base is DataType:
                if len(params) != 1:
                    raise MiniError("Type{...} takes exactly one parameter")
                return Kind(params[0])
            if not isinstance(base, Apply) or base.params:
                raise MiniError(f"cannot apply parameters to {show(base)}")
            try:
                return self.reg.apply(base.name, params)
            except TypeError_ as e:
                raise MiniError(str(e)) from None
        if h == "tuple":
            elems = []
            for k, a in enumerate(n.args):
                if a.head == "...":
                    if k != len(n.args) - 1:
                        raise MiniError("vararg type must be last")
                    elems.append(Vararg(self.eval_type(a.args[0], scope)))
                else:
                    elems.append(self.eval_type(a, scope))
            return TupleType(tuple(elems))
        if h == "call" and n.args[0].head == "id" and n.args[0].args[0] == "Union":
            return union_all(self.eval_type(a, scope) for a in n.args[1:])
        raise MiniError("invalid type expression")

    def _type_vars(self, decls, scope: dict) -> list:
        out = []
        for name, bound in decls:
            ub = self.eval_type(bound, scope) if bound is not None else AnyType
            v = TypeVar(name, ub)
            scope[name] = v
            out.append(v)
        return out

    # ------------------------------------------------------------ definitions

    def define_type(self, item: TypeItem):
        scope: dict = {}
        formals = self._type_vars(item.formals, scope)
        sup = self.eval_type(item.super, scope) if item.super is not None else AnyType
        ftypes = [self.eval_type(t, scope) if t is not None else AnyType
                  for _, t in item.fields]
        kind = {"abstract": ABSTRACT, "bits": BITS, "composite": COMPOSITE}[item.kind]
        try:
            tn = self.reg.declare(item.name, formals, kind, sup,
                                  [f for f, _ in item.fields], ftypes, item.nbits)
        except TypeError_ as e:
            raise MiniError(str(e)) from None
        self.tys.refresh()
        t = Apply(tn)
        self.globals[item.name] = self.reg.consed(t) if is_concrete(t) else t
        self.consts.add(item.name)
        if kind != COMPOSITE:
            return
        tn.constructors = GenericFunction(item.name)
        if item.ctors:
            for c in item.ctors:
                self.define_method(c, gf=tn.constructors)
        elif all(any(v is f for t in ftypes for v in free_vars(t)) for f in formals):
            # a formal no field mentions could never be determined
            self._default_ctor(tn, formals, ftypes, item.line)
        self.invalidate()

    def _default_ctor(self, tn, formals, ftypes, line):
        from .ir import IRFunction
        params = [f"#f{i}" for i in range(len(ftypes))]
        body = []
        if formals:
            body.append(Assign("#T", Call(Var("apply_type"),
                                          (Var(tn.name),) + tuple(Var(f.name) for f in formals))))
            ty = Var("#T")
        else:
            ty = Var(tn.name)
        body.append(Assign("#v", New(ty, tuple(Var(p) for p in params))))
        body.append(Return(Var("#v")))
        code = IRFunction(tn.name, params, body, static_params=[f.name for f in formals])
        m = MethodDef(tn.name, TupleType(tuple(ftypes)), tuple(formals), code, line=line)
        tn.constructors.add_method(m)

    def define_method(self, item: MethodItem, gf: GenericFunction | None = None):
        scope: dict = {}
        sparams = self._type_vars(item.sparams, scope)
        elems = []
        for p in item.params:
            t = self.eval_type(p.type, scope) if p.type is not None else AnyType
            elems.append(Vararg(t) if p.vararg else t)
        sig = TupleType(tuple(elems))
        m = MethodDef(item.name, sig, tuple(sparams), item.code, item.staged, item.line)
        if gf is None:
            gf = self._gf_for(item.name)
        for w in gf.add_method(m):
            self.warnings.append(w)
            self.diag.write(w + "\n")
        self.invalidate()
        return m

    def _gf_for(self, name: str) -> GenericFunction:
        cur = self.globals.get(name)
        if isinstance(cur, GenericFunction):
            return cur
        if isinstance(cur, Apply) and cur.name.kind == COMPOSITE and not cur.params:
            return cur.name.constructors
        if cur is not None:
            if isinstance(cur, Builtin):
                raise MiniError(f"cannot add methods to builtin {name}")
            if isinstance(cur, TypeTerm):
                raise MiniError(f"cannot add methods to type {show(cur)}")
            raise MiniError(f"invalid method definition: {name} is not a function")
        gf = GenericFunction(name)
        self.gfs[name] = gf
        self.globals[name] = gf
        self.consts.add(name)
        return gf

    # ------------------------------------------------------------ top level

    def eval_source(self, source: str, filename: str = "<input>", echo=None):
        """Run every top-level item; returns the last value."""
        items = lower_toplevel(source, self.lambdas)
        last = NOTHING
        for item in items:
            last = self.eval_item(item)
            if echo is not None and isinstance(item, ThunkItem) and item.is_expr:
                echo(last)
        return last

    def eval_item(self, item):
        if isinstance(item, TypeItem):
            self.define_type(item)
            return NOTHING
        if isinstance(item, MethodItem):
            gf = self._gf_for(item.name)
            self.define_method(item, gf)
            return gf
        return self.run_thunk(item)

    def run_thunk(self, item: ThunkItem):
        m = MethodDef("#toplevel", EMPTY, (), item.code, line=item.line)
        spec = self.specialize(m, EMPTY)
        self.thunk_specs.append(spec)
        v = self.invoke(spec, [])
        self.consts.update(item.const)
        return v

    # ------------------------------------------------------------ calls

    def call_value(self, f, args: list):
        if isinstance(f, GenericFunction):
            self.stats["dynamic_dispatches"] += 1
            return self.dispatch(f, args)
        if isinstance(f, Builtin):
            return f.fn(self, *args)
        if isinstance(f, Closure):
            return self.call_closure(f, args)
        if isinstance(f, Apply):
            return self.call_type(f, args)
        raise MiniError(f"{show_value(f)} is not callable")

    def call_type(self, t: Apply, args):
        tn = t.name
        if tn.kind == COMPOSITE:
            if t.params and len(t.params) == len(tn.formals):
                # fully applied: convert to the field types first
                sub = dict(zip(tn.formals, t.params))
                if len(args) != len(tn.field_types):
                    raise MiniError(f"wrong number of arguments constructing {show(t)}")
                conv = [self.convert(substitute(ft, sub), a)
                        for ft, a in zip(tn.field_types, args)]
                if tn.constructors.methods and not _is_default(tn):
                    return self.dispatch(tn.constructors, conv)
                return self.construct(t, conv)
            self.stats["dynamic_dispatches"] += 1
            return self.dispatch(tn.constructors, args)
        if len(args) == 1:
            return self.convert(t, args[0])
        raise MiniError(f"type {show(t)} is not callable")

    def convert(self, t, v):
        if t is AnyType or subtype(self.typeof(v), t):
            return v
        conv = self.globals.get("convert")
        if not isinstance(conv, GenericFunction):
            raise MiniError(f"cannot convert {show_value(v)} to {show(t)}")
        return self.dispatch(conv, [type_as_value(t), v])

    def call_closure(self, c: Closure, args):
        code = c.code
        if len(args) != len(code.params):
            raise MiniError(f"wrong number of arguments: {code.name} takes "
                            f"{len(code.params)}, got {len(args)}")
        env = dict(c.env)
        env.update(zip(code.params, args))
        return self.execute(code, env, None)

    def construct(self, t, args):
        if not isinstance(t, Apply) or t.name.kind != COMPOSITE:
            raise MiniError(f"new: {show_value(t)} is not a composite type")
        tn = t.name
        if len(t.params) != len(tn.formals) or not is_concrete(t):
            raise MiniError(f"new: type {show(t)} is not fully specified")
        if len(args) != len(tn.field_types):
            raise MiniError(f"new: {tn.name} has {len(tn.field_types)} fields, "
                            f"got {len(args)} values")
        sub = dict(zip(tn.formals, t.params))
        for name, ft, a in zip(tn.field_names, tn.field_types, args):
            ft = substitute(ft, sub) if sub else ft
            if not subtype(self.typeof(a), ft):
                raise MiniError(f"type assertion failed: field {name} of {show(t)} "
                                f"expects {show(ft)}, got {show(self.typeof(a))}")
        return Struct(self.reg.consed(t), tuple(args))

    # ------------------------------------------------------------ dispatch

    def dispatch(self, gf: GenericFunction, args: list):
        argt = self.argtuple(args)
        key = self._key(argt)
        e = gf.cache_lookup(argt, key, self.stats)
        if e is not None and not e.dummy:
            self.stats["cache_hits"] += 1
            if self.opts.dispatch_oracle:
                self._oracle(gf, argt, e.method)
            return self.invoke(e.spec, args, argt)
        self.stats["cache_misses"] += 1
        m, _ = gf.slow_lookup(argt)
        if m is None:
            raise MiniError(f"no method {gf.name}{show(argt)}")
        if m.staged:
            gm = self.expand_staged(m, argt)
            spec = self.specialize(gm, argt)
            gf.install(key, argt, CacheEntry(argt, m, spec))
            return self.invoke(spec, args, argt)
        w = argt
        if self.opts.heuristics and e is None and is_concrete(argt):
            w = gf.specialize_signature(m, argt, self.reg)
        spec = self.specialize(m, w)
        dummies = gf.dummies_for(m, w) if w is not argt else ()
        gf.install(key, argt, CacheEntry(w, m, spec), dummies)
        return self.invoke(spec, args, argt)

    def _oracle(self, gf, argt, chosen):
        self.stats["oracle_checks"] += 1
        m, _ = gf.slow_lookup(argt)
        if m is not chosen and not (m is not None and chosen is not None
                                    and m is chosen.origin):
            self.oracle_mismatches.append((gf.name, argt, chosen, m))

    def expand_staged(self, m: MethodDef, argt: TupleType) -> MethodDef:
        gm = m.expansions.get(argt)
        if gm is not None:
            return gm
        self.stats["staged_expansions"] += 1
        tvals = [type_as_value(t) for t in argt.elems]
        env = self._bind_args(m, m.code, tvals, argt)
        code = self.execute(m.code, env, None)
        if not isinstance(code, CodeValue):
            raise MiniError(f"staged function {m.name} did not return quoted code")
        body = lower_quote_body(code.source, m.code.params, m.code.vararg,
                                m.code.static_params, m.name, self.lambdas)
        gm = MethodDef(m.name, m.sig, m.sparams, body, line=m.line, origin=m)
        m.expansions[argt] = gm
        return gm

    def specialize(self, m: MethodDef, w: TupleType) -> Specialization:
        spec = m.specs.get(w)
        if spec is not None:
            return spec
        self.stats["specializations"] += 1
        spec = Specialization(m, w, m.code)
        if self.opts.infer:
            self.inferencer.annotate(spec)
            if self.opts.optimize:
                from .optimize import optimize
                optimize(self, spec)
        m.specs[w] = spec
        return spec

    def invoke(self, spec: Specialization, args: list, argt=None):
        m = spec.method
        code = spec.code
        env = self._bind_args(m, code, args, argt, spec.sparams)
        return self.execute(code, env, spec)

    def _bind_args(self, m, code, args, argt=None, known=None) -> dict:
        params = code.params
        if code.vararg:
            k = len(params) - 1
            env = dict(zip(params[:k], args))
            env[params[-1]] = tuple(args[k:])
            self.stats["tuple_allocations"] += 1
        else:
            env = dict(zip(params, args))
        if m.sparams:
            if known and len(known) == len(m.sparams):
                env.update(known)
            else:
                if argt is None:
                    argt = self.argtuple(args)
                sol = match(argt, m.sig) or {}
                for v in m.sparams:
                    if v in sol:
                        env[v.name] = type_as_value(sol[v])
        return env

    # ------------------------------------------------------------ interpreter

    def execute(self, code, env: dict, spec: Specialization | None):
        body = code.body
        loc = code.locals
        check = spec.types if (spec is not None and self.opts.check_inference) else None
        ev = self.eval
        pc = 1
        while True:
            s = body[pc - 1]
            cls = type(s)
            if cls is Assign:
                v = ev(s.expr, env, loc)
                if check is not None:
                    self._check(spec, pc, v)
                if s.var in loc:
                    env[s.var] = v
                else:
                    self.set_global(s.var, v)
                pc += 1
            elif cls is GotoIf:
                c = ev(s.cond, env, loc)
                if check is not None:
                    self._check(spec, pc, c)
                if c is False:
                    pc = s.label
                elif c is True:
                    pc += 1
                else:
                    raise MiniError(f"non-boolean ({show(self.typeof(c))}) used in "
                                    f"boolean context")
            elif cls is Goto:
                pc = s.label
            elif cls is Return:
                v = ev(s.expr, env, loc)
                if check is not None:
                    self._check(spec, pc, v)
                return v
            else:
                v = ev(s.expr, env, loc)
                if check is not None:
                    self._check(spec, pc, v)
                pc += 1

    def _check(self, spec, pc, v):
        t = spec.types.get(pc)
        self.stats["checked_values"] += 1
        if t is not None and not subtype(self.typeof(v), t):
            self.violations.append((spec.method.name, spec.argtypes, pc,
                                    self.typeof(v), t))

    def set_global(self, name, v):
        if name in self.consts and name in self.globals:
            raise MiniError(f"invalid redefinition of constant {name}")
        self.globals[name] = v

    def eval(self, e, env: dict, loc):
        cls = type(e)
        if cls is Var:
            name = e.name
            if name in loc:
                try:
                    return env[name]
                except KeyError:
                    raise MiniError(f"unbound variable {name}") from None
            try:
                return self.globals[name]
            except KeyError:
                raise MiniError(f"{name} not defined") from None
        if cls is Const:
            return e.value
        if cls is Call:
            f = self.eval(e.f, env, loc)
            args = [self.eval(a, env, loc) for a in e.args]
            if e.splat:
                args = self._splice(args, e.splat)
            return self.call_value(f, args)
        if cls is Invoke:
            args = [self.eval(a, env, loc) for a in e.args]
            return self.run_invoke(e, args)
        if cls is New:
            t = self.eval(e.type, env, loc)
            return self.construct(t, [self.eval(a, env, loc) for a in e.args])
        if cls is Quote:
            return CodeValue(e.source)
        if cls is Lambda:
            captured = {}
            for c in e.captured:
                if c in env:
                    captured[c] = env[c]
            return Closure(self.lambdas[e.fname], captured)
        raise MiniError(f"cannot evaluate {e!r}")

    def run_invoke(self, e: Invoke, args):
        self.stats["elided_dispatches"] += 1
        m = e.method
        if self.opts.dispatch_oracle:
            gf = self.callable_gf(self.globals.get(e.name)) if e.name else None
            if gf is not None:
                self._oracle(gf, self.argtuple(args), m)
        spec = self.specialize(m, e.argtypes)
        return self.invoke(spec, args)

    def _splice(self, args, flags):
        out = []
        for a, sp in zip(args, flags):
            if not sp:
                out.append(a)
            elif isinstance(a, tuple):
                out.extend(a)
            else:
                out.extend(self.iterate(a))
        return out

    def iterate(self, x):
        start, done, nxt = (self.globals.get(n) for n in ("start", "done", "next"))
        if not all(isinstance(f, GenericFunction) for f in (start, done, nxt)):
            raise MiniError(f"cannot splat {show_value(x)}")
        st = self.call_value(start, [x])
        out = []
        while self.call_value(done, [x, st]) is False:
            v, st = self.call_value(nxt, [x, st])
            out.append(v)
        return out


def _is_default(tn) -> bool:
    ms = tn.constructors.methods
    return len(ms) == 1 and ms[0].code.params and ms[0].code.params[0] == "#f0"


def run_source(source: str, options: Options | None = None):
    """Convenience: (output, diagnostics, context) for a program."""
    out, diag = io.StringIO(), io.StringIO()
    ctx = Context(options, out, diag)
    ctx.eval_source(source)
    return out.getvalue(), diag.getvalue(), ctx


__all__ = ["Context", "Options", "Specialization", "run_source", "MiniError", "ParseError"]
