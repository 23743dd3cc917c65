"""The IR: a 1-indexed array of assignments, calls, gotos and returns.

Lowering emits A-normal form: call arguments and callees are atoms
(``Var`` or ``Const``), every call sits at the top of a statement.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field


class Expr:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: object


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Call(Expr):
    f: Expr
    args: tuple
    splat: tuple = ()

    def is_splat(self, i: int) -> bool:
        return bool(self.splat) and self.splat[i]


@dataclass(frozen=True)
class Invoke(Expr):
    """A call resolved to one specialization; skips dispatch at run time."""

    method: object
    argtypes: object
    args: tuple
    name: str = ""


@dataclass(frozen=True)
class New(Expr):
    type: Expr
    args: tuple


@dataclass(frozen=True)
class Quote(Expr):
    source: str


@dataclass(frozen=True)
class Lambda(Expr):
    fname: str
    captured: tuple


class Stmt:
    __slots__ = ()


@dataclass(frozen=True)
class Assign(Stmt):
    var: str
    expr: Expr


@dataclass(frozen=True)
class Goto(Stmt):
    label: int


@dataclass(frozen=True)
class GotoIf(Stmt):
    """Jump to ``label`` when ``cond`` is false; fall through when true."""

    cond: Expr
    label: int


@dataclass(frozen=True)
class Return(Stmt):
    expr: Expr


@dataclass(frozen=True)
class ExprStmt(Stmt):
    expr: Expr


@dataclass
class IRFunction:
    name: str
    params: list
    body: list
    vararg: bool = False
    static_params: list = field(default_factory=list)
    globals: set = field(default_factory=set)
    captured: list = field(default_factory=list)
    staged: bool = False
    locals: set = field(default_factory=set)

    def __post_init__(self):
        if not self.locals:
            self.locals = compute_locals(self)

    def __len__(self) -> int:
        return len(self.body)

    def stmt(self, p: int) -> Stmt:
        """Statement at 1-based index ``p``."""
        return self.body[p - 1]

    def verify(self):
        n = len(self.body)
        if not n or not isinstance(self.body[-1], (Return, Goto)):
            raise ValueError(f"{self.name}: body does not end in return")
        for s in self.body:
            if isinstance(s, (Goto, GotoIf)) and not 1 <= s.label <= n:
                raise ValueError(f"{self.name}: goto target {s.label} out of range")


def compute_locals(f: IRFunction) -> set:
    names = set(f.params) | set(f.static_params) | set(f.captured)
    for s in f.body:
        if isinstance(s, Assign):
            names.add(s.var)
    return names - set(f.globals)


def calls_in(s: Stmt):
    e = stmt_expr(s)
    return e if isinstance(e, (Call, Invoke)) else None


def stmt_expr(s: Stmt):
    if isinstance(s, (Assign, Return, ExprStmt)):
        return s.expr
    if isinstance(s, GotoIf):
        return s.cond
    return None


def atoms(e: Expr):
    if isinstance(e, Call):
        return (e.f,) + e.args
    if isinstance(e, (Invoke, New)):
        return tuple(e.args) + ((e.type,) if isinstance(e, New) else ())
    if isinstance(e, Lambda):
        return tuple(Var(c) for c in e.captured)
    return (e,)


# ---------------------------------------------------------------- printing

def show_const(v) -> str:
    from .types import TypeTerm, show
    if v is True:
        return "true"
    if v is False:
        return "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        return repr(v) if ("." in repr(v) or "e" in repr(v) or "n" in repr(v)) else repr(v) + ".0"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, TypeTerm):
        return f"(type {show(v)})"
    if isinstance(v, tuple):
        return "(tuple " + " ".join(show_const(x) for x in v) + ")"
    name = getattr(v, "name", None)
    if isinstance(name, str):
        return f"(fn {name})"
    return f"(const {v!r})"


def show_expr(e) -> str:
    if isinstance(e, Const):
        return show_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Call):
        parts = [show_expr(e.f)]
        for i, a in enumerate(e.args):
            s = show_expr(a)
            parts.append(f"(... {s})" if e.is_splat(i) else s)
        return "(call " + " ".join(parts) + ")"
    if isinstance(e, Invoke):
        from .types import show
        return f"(invoke {e.name}{show(e.argtypes)} " + " ".join(show_expr(a) for a in e.args) + ")"
    if isinstance(e, New):
        return "(new " + " ".join(show_expr(a) for a in (e.type,) + tuple(e.args)) + ")"
    if isinstance(e, Quote):
        return f"(quote {json.dumps(e.source)})"
    if isinstance(e, Lambda):
        return "(lambda " + " ".join((e.fname,) + tuple(e.captured)) + ")"
    return repr(e)


def show_stmt(s: Stmt) -> str:
    if isinstance(s, Assign):
        return f"(= {s.var} {show_expr(s.expr)})"
    if isinstance(s, Goto):
        return f"(goto {s.label})"
    if isinstance(s, GotoIf):
        return f"(gotoif {show_expr(s.cond)} {s.label})"
    if isinstance(s, Return):
        return f"(return {show_expr(s.expr)})"
    if isinstance(s, ExprStmt):
        return show_expr(s.expr)
    return repr(s)


def header(f: IRFunction) -> str:
    sp = "{" + ",".join(f.static_params) + "}" if f.static_params else ""
    ps = list(f.params)
    if f.vararg and ps:
        ps[-1] += "..."
    h = f"function {f.name}{sp}({', '.join(ps)})"
    if f.globals:
        h += " global(" + ", ".join(sorted(f.globals)) + ")"
    if f.captured:
        h += " captured(" + ", ".join(f.captured) + ")"
    if f.staged:
        h = "@staged " + h
    return h


def dump(f: IRFunction, annotate=None) -> str:
    """Textual form; ``annotate(p)`` may supply a type suffix per statement."""
    lines = [header(f)]
    for p, s in enumerate(f.body, 1):
        line = f"  {p}: {show_stmt(s)}"
        if annotate is not None:
            t = annotate(p)
            if t is not None:
                line += f" :: {t}"
        lines.append(line)
    lines.append("end")
    return "\n".join(lines)


# ---------------------------------------------------------------- reading

_TOKEN = re.compile(r'\s*(?:(\()|(\))|("(?:[^"\\]|\\.)*")|([^\s()]+))')


def _sexpr_tokens(text: str):
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ValueError(f"bad IR text at {text[pos:pos + 20]!r}")
            return
        pos = m.end()
        if m.group(1):
            yield "("
        elif m.group(2):
            yield ")"
        elif m.group(3):
            yield ("str", json.loads(m.group(3)))
        elif m.group(4):
            yield ("sym", m.group(4))


_CLOSE = object()


def _parse_sexpr(tokens):
    tok = next(tokens)
    if tok == "(":
        out = []
        while (t := _parse_sexpr(tokens)) is not _CLOSE:
            out.append(t)
        return out
    if tok == ")":
        return _CLOSE
    return tok


_NUM = re.compile(r"^-?(\d+\.\d*|\d*\.\d+|\d+)([eE][-+]?\d+)?$")


def _to_expr(x) -> Expr:
    if isinstance(x, tuple):
        kind, val = x
        if kind == "str":
            return Const(val)
        if val == "true":
            return Const(True)
        if val == "false":
            return Const(False)
        if _NUM.match(val):
            if "." in val or "e" in val or "E" in val:
                return Const(float(val))
            return Const(int(val))
        return Var(val)
    head = x[0][1]
    rest = x[1:]
    if head == "call":
        f = _to_expr(rest[0])
        args, splat = [], []
        for a in rest[1:]:
            if isinstance(a, list) and a and a[0] == ("sym", "..."):
                args.append(_to_expr(a[1]))
                splat.append(True)
            else:
                args.append(_to_expr(a))
                splat.append(False)
        return Call(f, tuple(args), tuple(splat) if any(splat) else ())
    if head == "tuple":
        return Const(tuple(_to_expr(a).value for a in rest))
    if head == "new":
        return New(_to_expr(rest[0]), tuple(_to_expr(a) for a in rest[1:]))
    if head == "quote":
        return Quote(rest[0][1])
    if head == "lambda":
        return Lambda(rest[0][1], tuple(a[1] for a in rest[1:]))
    raise ValueError(f"unknown IR form {head}")


def _to_stmt(x) -> Stmt:
    head = x[0][1]
    if head == "=":
        return Assign(x[1][1], _to_expr(x[2]))
    if head == "goto":
        return Goto(int(x[1][1]))
    if head == "gotoif":
        return GotoIf(_to_expr(x[1]), int(x[2][1]))
    if head == "return":
        return Return(_to_expr(x[1]))
    return ExprStmt(_to_expr(x))


_HEADER = re.compile(
    r"^(@staged )?function (\S+?)(?:\{([^}]*)\})?\(([^)]*)\)"
    r"(?: global\(([^)]*)\))?(?: captured\(([^)]*)\))?$")


def _names(s):
    return [p.strip() for p in s.split(",") if p.strip()] if s else []


def read(text: str) -> list:
    """Parse the output of ``dump`` back into IRFunctions."""
    funcs = []
    lines = [ln for ln in text.splitlines() if ln.strip()]
    i = 0
    while i < len(lines):
        m = _HEADER.match(lines[i].strip())
        if not m:
            raise ValueError(f"bad IR header: {lines[i]!r}")
        staged, name, sp, ps, gl, cap = m.groups()
        params = _names(ps)
        vararg = bool(params) and params[-1].endswith("...")
        if vararg:
            params[-1] = params[-1][:-3]
        body = []
        i += 1
        while lines[i].strip() != "end":
            txt = lines[i].split(":", 1)[1].strip()
            # one s-expression per line; a trailing ":: T" annotation is ignored
            x = _parse_sexpr(_sexpr_tokens(txt))
            body.append(_to_stmt(x) if isinstance(x, list) else ExprStmt(_to_expr(x)))
            i += 1
        i += 1
        funcs.append(IRFunction(name, params, body, vararg=vararg,
                                static_params=_names(sp), globals=set(_names(gl)),
                                captured=_names(cap), staged=bool(staged)))
    return funcs
