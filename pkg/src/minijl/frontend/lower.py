"""Lowering from the surface tree to IR functions and top-level items."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from ..ir import (Assign, Call, Const, ExprStmt, Goto, GotoIf, IRFunction, Lambda,
                  New, Quote, Return, Var)
from .lexer import ParseError
from .parser import Node, parse

# the ":" operator names the range constructor
RENAMED_CALLEES = {":": "colon"}


@dataclass
class Param:
    name: str
    type: Node | None          # None: unannotated (Any)
    vararg: bool = False


@dataclass
class MethodItem:
    name: str
    params: list               # of Param
    sparams: list              # of (name, bound Node | None)
    code: IRFunction
    staged: bool = False
    line: int = 0
    # inner constructor of this type: `new` constructs it
    ctor_of: str | None = None


@dataclass
class TypeItem:
    kind: str                  # abstract, bits, composite
    name: str
    formals: list              # of (name, bound Node | None)
    super: Node | None
    nbits: int = 0
    fields: list = field(default_factory=list)   # of (name, Node | None)
    ctors: list = field(default_factory=list)    # of MethodItem
    line: int = 0


@dataclass
class ThunkItem:
    code: IRFunction
    const: tuple = ()
    line: int = 0
    # the REPL prints the value of expression statements
    is_expr: bool = True


_thunk_ids = itertools.count(1)
_lambda_ids = itertools.count(1)


def lower_toplevel(src_or_ast, lambdas: dict | None = None) -> list:
    """Lower a file; closures' bodies are collected into ``lambdas``."""
    ast = parse(src_or_ast) if isinstance(src_or_ast, str) else src_or_ast
    if lambdas is None:
        lambdas = {}
    items = []
    for st in ast.args:
        items.append(lower_item(st, lambdas))
    return items


def err(msg: str, n: Node):
    raise ParseError(msg, n.line, n.col)


def is_method_def(st: Node) -> bool:
    if st.head == "function":
        return True
    if st.head == "=" and st.args[0].head == "call":
        return True
    return False


def lower_item(st: Node, lambdas: dict):
    if is_method_def(st):
        return lower_method(st, lambdas)
    if st.head == "abstract":
        name, formals, sup = _type_head(st.args[0])
        return TypeItem("abstract", name, formals, sup, line=st.line)
    if st.head == "bitstype":
        name, formals, sup = _type_head(st.args[1])
        return TypeItem("bits", name, formals, sup, nbits=st.args[0], line=st.line)
    if st.head == "type":
        head, fields, ctors = st.args
        name, formals, sup = _type_head(head)
        fs = []
        for f in fields:
            if f.head == "id":
                fs.append((f.args[0], None))
            else:
                fs.append((f.args[0].args[0], f.args[1]))
        ms = []
        for c in ctors:
            m = lower_method(c, lambdas, type_formals=formals, ctor_of=name)
            if m.name != name:
                err(f"constructor in type {name} must be named {name}", c)
            ms.append(m)
        return TypeItem("composite", name, formals, sup, fields=fs, ctors=ms, line=st.line)
    consts = ()
    if st.head == "const":
        consts = tuple(_assigned_target_names(a) for a in st.args)
        consts = tuple(n for group in consts for n in group)
        st = Node("block", st.args, st.line, st.col)
    is_expr = st.head not in ("=", "for", "while", "global", "local", "block", "if")
    code = FunctionLowerer(f"#thunk{next(_thunk_ids)}", [], toplevel=True,
                           lambdas=lambdas).lower_body(st)
    return ThunkItem(code, consts, st.line, is_expr)


def _assigned_target_names(n: Node) -> list:
    if n.head == "=":
        return _assigned_target_names(n.args[0])
    if n.head == "id":
        return [n.args[0]]
    if n.head == "::" and n.args[0] is not None:
        return _assigned_target_names(n.args[0])
    if n.head == "tuple":
        return [x for a in n.args for x in _assigned_target_names(a)]
    return []


def _type_head(h: Node):
    name_node, sup = h.args
    formals = []
    if name_node.head == "curly":
        for p in name_node.args[1:]:
            formals.append(_tvar_decl(p))
        name_node = name_node.args[0]
    if name_node.head != "id":
        err("expected type name", name_node)
    return name_node.args[0], formals, sup


def _tvar_decl(p: Node):
    if p.head == "id":
        return (p.args[0], None)
    if p.head == "call" and p.args[0].args[0] == "<:" and p.args[1].head == "id":
        return (p.args[1].args[0], p.args[2])
    err("expected type parameter", p)


def lower_method(st: Node, lambdas: dict, type_formals=(), ctor_of=None) -> MethodItem:
    if st.head == "function":
        sig, body = st.args
    else:
        sig, body = st.args
    callee = sig.args[0]
    sparams = []
    if callee.head == "curly":
        sparams = [_tvar_decl(p) for p in callee.args[1:]]
        callee = callee.args[0]
    if callee.head != "id":
        err("invalid function name", callee)
    name = RENAMED_CALLEES.get(callee.args[0], callee.args[0])
    # an inner constructor sees the type's own parameters
    own = {n for n, _ in sparams}
    sparams = [tv for tv in type_formals if tv[0] not in own] + sparams
    params = []
    for k, a in enumerate(sig.args[1:]):
        vararg = False
        if a.head == "...":
            vararg = True
            a = a.args[0]
            if k != len(sig.args) - 2:
                err("vararg parameter must be last", a)
        if a.head == "id":
            params.append(Param(a.args[0], None, vararg))
        elif a.head == "::":
            pname = a.args[0].args[0] if a.args[0] is not None else f"#unused{k + 1}"
            if a.args[0] is not None and a.args[0].head != "id":
                err("invalid parameter", a)
            params.append(Param(pname, a.args[1], vararg))
        else:
            err("invalid parameter", a)
    fl = FunctionLowerer(name, [p.name for p in params],
                         vararg=bool(params) and params[-1].vararg,
                         static_params=[n for n, _ in sparams], lambdas=lambdas,
                         ctor_of=ctor_of, type_formals=[n for n, _ in type_formals])
    code = fl.lower_body(body)
    code.staged = st.meta == "staged"
    return MethodItem(name, params, sparams, code, staged=code.staged, line=st.line,
                      ctor_of=ctor_of)


def lower_quote_body(source: str, params, vararg: bool, static_params, name: str,
                     lambdas: dict) -> IRFunction:
    """Lower the text of a quoted block as a method body."""
    ast = parse(source)
    block = Node("block", ast.args, ast.line, ast.col)
    return FunctionLowerer(name, list(params), vararg=vararg,
                           static_params=list(static_params),
                           lambdas=lambdas).lower_body(block)


# ---------------------------------------------------------------- scope

def scan_assigned(n, out: set, declared_globals: set):
    """Names assigned anywhere in ``n`` (closures excluded)."""
    if not isinstance(n, Node):
        return
    h = n.head
    if h == "->":
        return
    if h == "=":
        for name in _assigned_target_names(n.args[0]):
            out.add(name)
        if n.args[0].head == "ref":
            scan_assigned(n.args[0], out, declared_globals)
        scan_assigned(n.args[1], out, declared_globals)
        return
    if h == "for":
        for name in _assigned_target_names(n.args[0]):
            out.add(name)
    if h == "global":
        for a in n.args:
            declared_globals.update(_assigned_target_names(a) or
                                    ([a.args[0]] if a.head == "id" else []))
    if h == "::" and n.args[0] is not None and n.args[0].head == "id":
        out.add(n.args[0].args[0])
    for a in n.args:
        if isinstance(a, Node):
            scan_assigned(a, out, declared_globals)
        elif isinstance(a, list):
            for x in a:
                scan_assigned(x, out, declared_globals)


def free_reads(n, out: set):
    if not isinstance(n, Node):
        return
    if n.head == "id":
        out.add(n.args[0])
        return
    for a in n.args:
        if isinstance(a, Node):
            free_reads(a, out)
        elif isinstance(a, list):
            for x in a:
                free_reads(x, out)


# ---------------------------------------------------------------- function bodies

class FunctionLowerer:
    def __init__(self, name, params, vararg=False, static_params=(), toplevel=False,
                 lambdas=None, ctor_of=None, type_formals=(), captured=()):
        self.name = name
        self.params = list(params)
        self.vararg = vararg
        self.static_params = list(static_params)
        self.toplevel = toplevel
        self.lambdas = lambdas if lambdas is not None else {}
        self.ctor_of = ctor_of
        self.type_formals = list(type_formals)
        self.captured = list(captured)
        self.body = []
        self.labels = {}
        self.tmp = itertools.count(1)
        self.label_ids = itertools.count(1)
        self.loops = []
        self.globals = set()
        self.locals = set()
        # declared variable -> temp holding its type
        self.declared = {}

    # ---- emission helpers

    def emit(self, s):
        self.body.append(s)

    def new_tmp(self) -> str:
        return f"#{next(self.tmp)}"

    def new_label(self) -> int:
        return -next(self.label_ids)

    def mark(self, label: int):
        self.labels[label] = len(self.body) + 1

    def lower_body(self, node: Node) -> IRFunction:
        assigned, gl = set(), set()
        scan_assigned(node, assigned, gl)
        self.globals = gl
        if self.toplevel:
            self.globals |= assigned
        fixed = set(self.params) | set(self.static_params) | set(self.captured)
        self.locals = (assigned | fixed) - (self.globals - fixed)
        v = self.value(node)
        self.emit(Return(v))
        body = [self._patch(s) for s in self.body]
        f = IRFunction(self.name, self.params, body, vararg=self.vararg,
                       static_params=self.static_params,
                       globals=self.globals & _assigned_in(body),
                       captured=self.captured)
        f.verify()
        return f

    def _patch(self, s):
        if isinstance(s, Goto) and s.label < 0:
            return Goto(self.labels[s.label])
        if isinstance(s, GotoIf) and s.label < 0:
            return GotoIf(s.cond, self.labels[s.label])
        return s

    def atom(self, node: Node):
        e = self.value(node)
        if isinstance(e, (Const, Var)):
            return e
        t = self.new_tmp()
        self.emit(Assign(t, e))
        return Var(t)

    def call(self, fname: str, *args) -> Call:
        return Call(Var(fname), tuple(args))

    # ---- expressions

    def value(self, n: Node):
        """Lower ``n`` for its value; may return a non-atomic expression."""
        h = n.head
        if h == "lit":
            return Const(n.args[0])
        if h == "id":
            name = n.args[0]
            if name in ("new",) and self.ctor_of is None:
                err("new used outside of a constructor", n)
            return Var(RENAMED_CALLEES.get(name, name))
        if h == "call":
            return self.lower_call(n)
        if h == "tuple":
            return self.lower_call_parts(Var("tuple"), n.args)
        if h == "curly":
            return self.lower_call_parts(Var("apply_type"), n.args)
        if h == "ref":
            return self.lower_call_parts(Var("ref"), n.args)
        if h in ("vcat", "hcat"):
            return self.lower_call_parts(Var(h), n.args)
        if h == "hvcat":
            rows = tuple(len(r) for r in n.args)
            args = [self.atom(x) for r in n.args for x in r]
            return Call(Var("hvcat"), (Const(rows),) + tuple(args))
        if h == "getfield":
            obj = self.atom(n.args[0])
            return self.call("getfield", obj, Const(n.args[1]))
        if h == "::":
            if n.args[0] is None:
                err("unexpected '::'", n)
            x = self.atom(n.args[0])
            t = self.atom(n.args[1])
            return self.call("typeassert", x, t)
        if h == "=":
            return self.lower_assign(n)
        if h == "block":
            if not n.args:
                return Var("nothing")
            for st in n.args[:-1]:
                self.stmt(st)
            return self.value(n.args[-1])
        if h == "if":
            return self.lower_if(n, want=True)
        if h in ("&&", "||"):
            t = self.new_tmp()
            end = self.new_label()
            self.emit(Assign(t, self.value(n.args[0])))
            if h == "&&":
                self.emit(GotoIf(Var(t), end))
                self.emit(Assign(t, self.value(n.args[1])))
            else:
                other = self.new_label()
                self.emit(GotoIf(Var(t), other))
                self.emit(Goto(end))
                self.mark(other)
                self.emit(Assign(t, self.value(n.args[1])))
            self.mark(end)
            return Var(t)
        if h in ("while", "for", "break", "continue", "global", "local"):
            self.stmt(n)
            return Var("nothing")
        if h == "return":
            self.stmt(n)
            return Var("nothing")
        if h == "->":
            return self.lower_lambda(n)
        if h == "quote":
            return Quote(n.meta)
        if h == "...":
            err("splat '...' is only allowed in call arguments", n)
        if h in ("function", "type", "abstract", "bitstype"):
            err("unsupported construct: nested definition", n)
        if h == "const":
            err("unsupported construct: const inside a function", n)
        err(f"unsupported construct: {h}", n)

    def lower_call(self, n: Node):
        f = n.args[0]
        args = n.args[1:]
        if f.head == "id" and f.args[0] == "new":
            if self.ctor_of is None:
                err("new used outside of a constructor", f)
            if self.type_formals:
                ty = self.atom(Node("curly", [Node("id", [self.ctor_of])] +
                                    [Node("id", [p]) for p in self.type_formals]))
            else:
                ty = Var(self.ctor_of)
            return New(ty, tuple(self.atom(a) for a in args))
        callee = self.atom(f) if f.head != "id" else Var(RENAMED_CALLEES.get(f.args[0], f.args[0]))
        return self.lower_call_parts(callee, args)

    def lower_call_parts(self, callee, args):
        if isinstance(callee, Node):
            callee = self.atom(callee)
        out, splat = [], []
        for a in args:
            if a.head == "...":
                out.append(self.atom(a.args[0]))
                splat.append(True)
            else:
                out.append(self.atom(a))
                splat.append(False)
        return Call(callee, tuple(out), tuple(splat) if any(splat) else ())

    def lower_assign(self, n: Node):
        lhs, rhs = n.args
        if lhs.head == "ref":
            a = self.atom(lhs.args[0])
            idx = [self.atom(i) for i in lhs.args[1:]]
            v = self.atom(rhs)
            self.emit(ExprStmt(Call(Var("assign"), (a, v) + tuple(idx))))
            return v
        if lhs.head == "::":
            if lhs.args[0] is None or lhs.args[0].head != "id":
                err("invalid declaration", lhs)
            self.declare(lhs.args[0].args[0], lhs.args[1])
            lhs = lhs.args[0]
        if lhs.head == "id":
            name = lhs.args[0]
            if name in self.declared:
                v = self.atom(rhs)
                self.assign_declared(name, v)
                return v
            e = self.value(rhs)
            self.emit(Assign(name, e))
            return Var(name)
        if lhs.head == "tuple":
            v = self.atom(rhs)
            for k, target in enumerate(lhs.args, 1):
                if target.head != "id":
                    err("unsupported construct: nested destructuring", target)
                self.emit(Assign(target.args[0], self.call("tupleref", v, Const(k))))
            return v
        if lhs.head == "getfield":
            err("unsupported construct: field assignment (values are immutable)", lhs)
        err("invalid assignment target", lhs)

    def declare(self, name: str, tnode: Node):
        t = f"#T_{name}"
        self.emit(Assign(t, self.value(tnode)))
        self.declared[name] = t
        self.locals.add(t)

    def assign_declared(self, name: str, v):
        t = Var(self.declared[name])
        c = self.new_tmp()
        self.emit(Assign(c, self.call("convert", t, v)))
        self.emit(Assign(name, self.call("typeassert", Var(c), t)))

    def lower_if(self, n: Node, want: bool):
        cond = n.args[0]
        then = n.args[1]
        other = n.args[2] if len(n.args) > 2 else None
        t = self.new_tmp() if want else None
        lelse = self.new_label()
        lend = self.new_label()
        self.cond(cond, lelse)
        if want:
            self.emit(Assign(t, self.value(then)))
        else:
            self.stmt(then)
        if other is not None or want:
            self.emit(Goto(lend))
        self.mark(lelse)
        if other is not None:
            if want:
                self.emit(Assign(t, self.value(other)))
            else:
                self.stmt(other)
        elif want:
            self.emit(Assign(t, Var("nothing")))
        self.mark(lend)
        return Var(t) if want else None

    def cond(self, n: Node, false_label: int):
        """Emit a branch to ``false_label`` taken when ``n`` is false."""
        if n.head == "&&":
            self.cond(n.args[0], false_label)
            self.cond(n.args[1], false_label)
            return
        if n.head == "||":
            lnext = self.new_label()
            ltrue = self.new_label()
            self.cond(n.args[0], lnext)
            self.emit(Goto(ltrue))
            self.mark(lnext)
            self.cond(n.args[1], false_label)
            self.mark(ltrue)
            return
        e = self.value(n)
        self.emit(GotoIf(e, false_label))

    def lower_lambda(self, n: Node):
        params_node, body = n.args
        if params_node.head == "id":
            names = [params_node.args[0]]
        elif params_node.head == "tuple":
            names = []
            for p in params_node.args:
                if p.head != "id":
                    err("unsupported construct: typed lambda parameter", p)
                names.append(p.args[0])
        else:
            err("invalid anonymous function parameters", params_node)
        reads = set()
        free_reads(body, reads)
        inner_assigned, _ = set(), set()
        scan_assigned(body, inner_assigned, set())
        captured = sorted(x for x in reads
                          if x in self.locals and x not in names and x not in inner_assigned)
        fname = f"#lambda{next(_lambda_ids)}"
        fl = FunctionLowerer(fname, names, lambdas=self.lambdas, captured=captured)
        self.lambdas[fname] = fl.lower_body(body)
        return Lambda(fname, tuple(captured))

    # ---- statements

    def stmt(self, n: Node):
        h = n.head
        if h == "return":
            v = self.value(n.args[0]) if n.args else Var("nothing")
            self.emit(Return(v))
            return
        if h == "if":
            self.lower_if(n, want=False)
            return
        if h == "while":
            top = self.new_label()
            end = self.new_label()
            self.mark(top)
            self.cond(n.args[0], end)
            self.loops.append((top, end))
            self.stmt(n.args[1])
            self.loops.pop()
            self.emit(Goto(top))
            self.mark(end)
            return
        if h == "for":
            self.stmt(self.expand_for(n))
            return
        if h in ("break", "continue"):
            if not self.loops:
                err(f"{h} outside of a loop", n)
            top, end = self.loops[-1]
            self.emit(Goto(end if h == "break" else top))
            return
        if h == "block":
            for st in n.args:
                self.stmt(st)
            return
        if h in ("global", "local"):
            for a in n.args:
                if a.head == "=":
                    self.stmt(a)
                elif a.head == "::":
                    self.declare(a.args[0].args[0], a.args[1])
                elif a.head != "id":
                    err(f"invalid {h} declaration", a)
            return
        if h == "::" and n.args[0] is not None and n.args[0].head == "id":
            self.declare(n.args[0].args[0], n.args[1])
            return
        if h == "=":
            self.lower_assign(n)
            return
        e = self.value(n)
        if not isinstance(e, (Const, Var)):
            self.emit(ExprStmt(e))

    def expand_for(self, n: Node) -> Node:
        """for x in r ... end  =>  the start/done/next while loop."""
        target, it, body = n.args
        k = next(self.tmp)
        pre = []
        if it.head != "id":
            rname = f"#range{k}"
            self.locals.add(rname)
            pre.append(Node("=", [Node("id", [rname]), it], it.line, it.col))
            it = Node("id", [rname], it.line, it.col)
        state = Node("id", [f"#state{k}"], n.line, n.col)
        self.locals.add(state.args[0])
        ln, cl = n.line, n.col
        start = Node("=", [state, Node("call", [Node("id", ["start"]), it])], ln, cl)
        cond = Node("call", [Node("id", ["!"]),
                             Node("call", [Node("id", ["done"]), it, state])], ln, cl)
        step = Node("=", [Node("tuple", [target, state]),
                          Node("call", [Node("id", ["next"]), it, state])], ln, cl)
        inner = Node("block", [step] + list(body.args), body.line, body.col)
        return Node("block", pre + [start, Node("while", [cond, inner], ln, cl)], ln, cl)


def _assigned_in(body) -> set:
    return {s.var for s in body if isinstance(s, Assign)}
