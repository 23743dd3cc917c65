"""Recursive-descent parser producing a small head/args tree."""

from __future__ import annotations

from dataclasses import dataclass, field

from .lexer import ParseError, Token, tokenize


@dataclass
class Node:
    head: str
    args: list = field(default_factory=list)
    line: int = 0
    col: int = 0
    # extra payload: source text for quote, staged flag for functions
    meta: object = None

    def __repr__(self) -> str:
        if self.head in ("id", "lit"):
            return f"{self.head}:{self.args[0]!r}"
        return f"({self.head} {' '.join(map(repr, self.args))})"


COMPARISON = ("==", "!=", "<", ">", "<=", ">=", "<:")
PLUS = ("+", "-", "|")
TIMES = ("*", "/", "%", "//", "&")
OPERATOR_NAMES = set(COMPARISON + PLUS + TIMES + ("^", "!", ":"))
UPDATE = {"+=": "+", "-=": "-", "*=": "*", "/=": "/", "^=": "^", "//=": "//"}
BLOCK_END = ("end", "else", "elseif")


def parse(src: str) -> Node:
    """Parse a whole file into a ``toplevel`` node."""
    return Parser(src).parse_toplevel()


class Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = tokenize(src)
        self.i = 0
        # >0 inside parens: newlines are insignificant
        self.paren = 0
        # inside [ ]: whitespace separates elements
        self.space_sensitive = False
        self.no_range = False

    # ------------------------------------------------------------ tokens

    def _index(self, k: int = 0) -> int:
        j = self.i
        while True:
            if self.toks[j].kind == "nl" and self.paren > 0:
                j += 1
                continue
            if k == 0:
                return j
            k -= 1
            j += 1

    def peek(self, k: int = 0) -> Token:
        return self.toks[self._index(k)]

    def next(self) -> Token:
        j = self._index()
        self.i = j + 1
        return self.toks[j]

    def error(self, msg: str, t: Token | None = None):
        t = t or self.peek()
        raise ParseError(msg, t.line, t.col)

    def expect_op(self, op: str) -> Token:
        t = self.next()
        if not t.is_op(op):
            self.error(f"expected '{op}', got {self.describe(t)}", t)
        return t

    def expect_kw(self, kw: str) -> Token:
        t = self.next()
        if not t.is_kw(kw):
            self.error(f"expected '{kw}', got {self.describe(t)}", t)
        return t

    @staticmethod
    def describe(t: Token) -> str:
        if t.kind == "eof":
            return "end of input"
        if t.kind == "nl":
            return "newline"
        return repr(t.value)

    def skip_newlines(self):
        while self.peek().kind == "nl" or self.peek().is_op(";"):
            self.next()

    def at_stmt_end(self) -> bool:
        t = self.peek()
        return t.kind in ("nl", "eof") or t.is_op(";") or t.is_kw(*BLOCK_END)

    def node(self, head, args, t: Token, meta=None) -> Node:
        return Node(head, args, t.line, t.col, meta)

    # ------------------------------------------------------------ statements

    def parse_toplevel(self) -> Node:
        stmts = []
        first = self.peek()
        self.skip_newlines()
        while self.peek().kind != "eof":
            stmts.append(self.parse_stmt())
            self.end_stmt()
            self.skip_newlines()
        return self.node("toplevel", stmts, first)

    def end_stmt(self):
        t = self.peek()
        if not (t.kind in ("nl", "eof") or t.is_op(";") or t.is_kw(*BLOCK_END)):
            self.error(f"unexpected {self.describe(t)} after statement", t)

    def parse_block(self, terminators=BLOCK_END) -> Node:
        t0 = self.peek()
        stmts = []
        saved = self.paren
        self.paren = 0
        self.skip_newlines()
        while not self.peek().is_kw(*terminators):
            if self.peek().kind == "eof":
                self.error("unexpected end of input, expected 'end'")
            stmts.append(self.parse_stmt())
            self.end_stmt()
            self.skip_newlines()
        self.paren = saved
        return self.node("block", stmts, t0)

    def parse_stmt(self) -> Node:
        t = self.peek()
        if t.kind == "kw":
            kw = t.value
            if kw == "function":
                return self.parse_function()
            if kw in ("type", "immutable"):
                return self.parse_type()
            if kw == "abstract":
                return self.parse_abstract()
            if kw == "bitstype":
                return self.parse_bitstype()
            if kw == "return":
                self.next()
                if self.at_stmt_end():
                    return self.node("return", [], t)
                return self.node("return", [self.parse_tuple_expr()], t)
            if kw in ("break", "continue"):
                self.next()
                return self.node(kw, [], t)
            if kw in ("global", "local", "const"):
                self.next()
                items = [self.parse_assign()]
                while self.peek().is_op(","):
                    self.next()
                    items.append(self.parse_assign())
                return self.node(kw, items, t)
        if t.is_op("@"):
            return self.parse_macro()
        return self.parse_expr_stmt()

    def parse_expr_stmt(self) -> Node:
        t = self.peek()
        e = self.parse_tuple_expr()
        nt = self.peek()
        if nt.is_op("="):
            self.next()
            self.skip_nl_after_op()
            rhs = self.parse_expr_stmt()
            return self.node("=", [e, rhs], nt)
        if nt.kind == "op" and nt.value in UPDATE:
            self.next()
            self.skip_nl_after_op()
            rhs = self.parse_expr_stmt()
            return self.node("=", [e, self.node("call", [Node("id", [UPDATE[nt.value]]), e, rhs], nt)], nt)
        return e

    def parse_tuple_expr(self) -> Node:
        """An expression, or a bare comma tuple ``a, b``."""
        t = self.peek()
        e = self.parse_arrow()
        if self.peek().is_op(",") and self.paren == 0 and not self.space_sensitive:
            items = [e]
            while self.peek().is_op(","):
                self.next()
                items.append(self.parse_arrow())
            return self.node("tuple", items, t, meta="bare")
        return e

    def skip_nl_after_op(self):
        while self.toks[self.i].kind == "nl":
            self.i += 1

    def parse_macro(self) -> Node:
        at = self.next()
        name = self.next()
        if name.kind != "id" or name.value != "staged":
            self.error(f"unsupported construct: macro @{name.value}", name)
        if not self.peek().is_kw("function"):
            self.error("@staged must annotate a function definition")
        f = self.parse_function()
        f.meta = "staged"
        return f

    def parse_function(self) -> Node:
        t = self.expect_kw("function")
        sig = self.parse_signature()
        body = self.parse_block()
        self.expect_kw("end")
        return self.node("function", [sig, body], t)

    def parse_signature(self) -> Node:
        t = self.peek()
        if t.kind == "op" and t.value in OPERATOR_NAMES:
            self.next()
            name = self.node("id", [t.value], t)
            if self.peek().is_op("{"):
                name = self.parse_curly(name)
        elif t.kind == "id":
            self.next()
            name = self.node("id", [t.value], t)
            if self.peek().is_op("{"):
                name = self.parse_curly(name)
        else:
            self.error(f"expected function name, got {self.describe(t)}", t)
        if not self.peek().is_op("("):
            self.error("expected '(' in function signature")
        args = self.parse_call_args()
        sig = self.node("call", [name] + args, t)
        if self.peek().is_op("::"):
            self.error("unsupported construct: return type declaration")
        return sig

    def parse_type(self) -> Node:
        t = self.next()
        head = self.parse_type_head()
        fields, ctors = [], []
        saved = self.paren
        self.paren = 0
        self.skip_newlines()
        while not self.peek().is_kw("end"):
            s = self.peek()
            if s.kind == "eof":
                self.error("unexpected end of input in type block")
            st = self.parse_stmt()
            if st.head == "function" or (st.head == "=" and st.args[0].head == "call"):
                ctors.append(st)
            elif st.head == "id" or (st.head == "::" and st.args[0] is not None
                                     and st.args[0].head == "id"):
                fields.append(st)
            else:
                self.error("expected field declaration or constructor in type block", s)
            self.end_stmt()
            self.skip_newlines()
        self.paren = saved
        self.expect_kw("end")
        return self.node("type", [head, fields, ctors], t)

    def parse_type_head(self) -> Node:
        """``Name{T<:B,...} <: Super``."""
        t = self.peek()
        if t.kind != "id":
            self.error(f"expected type name, got {self.describe(t)}", t)
        self.next()
        name = self.node("id", [t.value], t)
        if self.peek().is_op("{"):
            name = self.parse_curly(name)
        sup = None
        if self.peek().is_op("<:"):
            self.next()
            sup = self.parse_postfix()
        return self.node("typehead", [name, sup], t)

    def parse_abstract(self) -> Node:
        t = self.next()
        return self.node("abstract", [self.parse_type_head()], t)

    def parse_bitstype(self) -> Node:
        t = self.next()
        nb = self.next()
        if nb.kind != "num" or not isinstance(nb.value, int):
            self.error("expected bit width after bitstype", nb)
        return self.node("bitstype", [nb.value, self.parse_type_head()], t)

    # ------------------------------------------------------------ expressions

    def parse_assign(self) -> Node:
        """Single expression allowing a nested ``=`` (used in call args and globals)."""
        e = self.parse_arrow()
        t = self.peek()
        if t.is_op("=") and not self.space_sensitive:
            self.next()
            self.skip_nl_after_op()
            return self.node("=", [e, self.parse_assign()], t)
        if t.kind == "op" and t.value in UPDATE:
            self.next()
            rhs = self.parse_assign()
            return self.node("=", [e, self.node("call", [Node("id", [UPDATE[t.value]]), e, rhs], t)], t)
        return e

    def parse_arrow(self) -> Node:
        e = self.parse_ternary()
        t = self.peek()
        if t.is_op("->"):
            self.next()
            self.skip_nl_after_op()
            body = self.parse_arrow()
            return self.node("->", [e, body], t)
        return e

    def parse_ternary(self) -> Node:
        c = self.parse_or()
        t = self.peek()
        if t.is_op("?"):
            self.next()
            self.skip_nl_after_op()
            saved = self.no_range
            self.no_range = True
            a = self.parse_arrow()
            self.no_range = saved
            self.skip_nl_after_op()
            self.expect_op(":")
            self.skip_nl_after_op()
            b = self.parse_arrow()
            return self.node("if", [c, a, b], t)
        return c

    def parse_or(self) -> Node:
        a = self.parse_and()
        t = self.peek()
        if t.is_op("||"):
            self.next()
            self.skip_nl_after_op()
            return self.node("||", [a, self.parse_or()], t)
        return a

    def parse_and(self) -> Node:
        a = self.parse_comparison()
        t = self.peek()
        if t.is_op("&&"):
            self.next()
            self.skip_nl_after_op()
            return self.node("&&", [a, self.parse_and()], t)
        return a

    def binop_ahead(self, ops) -> Token | None:
        t = self.peek()
        if t.kind != "op" or t.value not in ops:
            return None
        if self.space_sensitive and t.space_before:
            # "[a -b]" is two elements, "[a - b]" is one
            nt = self.toks[self._index() + 1]
            if not nt.space_before and t.value in ("+", "-"):
                return None
        return t

    def parse_comparison(self) -> Node:
        t0 = self.peek()
        first = self.parse_range()
        operands, ops = [first], []
        while (t := self.binop_ahead(COMPARISON)) is not None:
            self.next()
            self.skip_nl_after_op()
            ops.append(t)
            operands.append(self.parse_range())
        if not ops:
            return first
        result = None
        for k, t in enumerate(ops):
            c = self.node("call", [Node("id", [t.value], t.line, t.col), operands[k], operands[k + 1]], t)
            result = c if result is None else self.node("&&", [result, c], t0)
        return result

    def parse_range(self) -> Node:
        a = self.parse_plus()
        if self.no_range:
            return a
        t = self.peek()
        if t.is_op(":") and not (self.space_sensitive and t.space_before):
            self.next()
            b = self.parse_plus()
            if self.peek().is_op(":"):
                self.next()
                c = self.parse_plus()
                return self.node("call", [Node("id", [":"]), a, b, c], t)
            return self.node("call", [Node("id", [":"]), a, b], t)
        return a

    def parse_plus(self) -> Node:
        a = self.parse_times()
        while (t := self.binop_ahead(PLUS)) is not None:
            self.next()
            self.skip_nl_after_op()
            b = self.parse_times()
            a = self.node("call", [Node("id", [t.value], t.line, t.col), a, b], t)
        return a

    def parse_times(self) -> Node:
        a = self.parse_unary()
        while (t := self.binop_ahead(TIMES)) is not None:
            self.next()
            self.skip_nl_after_op()
            b = self.parse_unary()
            a = self.node("call", [Node("id", [t.value], t.line, t.col), a, b], t)
        return a

    def parse_unary(self) -> Node:
        t = self.peek()
        if t.kind == "op" and t.value in ("-", "+", "!"):
            nt = self.peek(1)
            if nt.is_op("(") and not nt.space_before:
                return self.parse_power()
            self.next()
            operand = self.parse_unary()
            if t.value == "-" and operand.head == "lit" and isinstance(operand.args[0], (int, float)) \
                    and not isinstance(operand.args[0], bool):
                return self.node("lit", [-operand.args[0]], t)
            if t.value == "+":
                return operand
            return self.node("call", [Node("id", [t.value], t.line, t.col), operand], t)
        return self.parse_power()

    def parse_power(self) -> Node:
        a = self.parse_postfix()
        t = self.peek()
        if t.is_op("^"):
            self.next()
            b = self.parse_unary()
            return self.node("call", [Node("id", ["^"], t.line, t.col), a, b], t)
        return a

    def parse_postfix(self) -> Node:
        e = self.parse_primary()
        while True:
            t = self.peek()
            attached = not t.space_before or not self.space_sensitive
            if t.is_op("(") and not t.space_before:
                args = self.parse_call_args()
                e = self.node("call", [e] + args, t)
            elif t.is_op("[") and attached:
                e = self.parse_index(e)
            elif t.is_op("{") and not t.space_before:
                e = self.parse_curly(e)
            elif t.is_op(".") and not t.space_before:
                self.next()
                f = self.next()
                if f.kind != "id":
                    self.error("expected field name after '.'", f)
                e = self.node("getfield", [e, f.value], t)
            elif t.is_op("::"):
                self.next()
                e = self.node("::", [e, self.parse_type_expr()], t)
            else:
                return e

    def parse_type_expr(self) -> Node:
        e = self.parse_primary()
        while True:
            t = self.peek()
            if t.is_op("{") and not t.space_before:
                e = self.parse_curly(e)
            elif t.is_op("(") and not t.space_before:
                e = self.node("call", [e] + self.parse_call_args(), t)
            else:
                return e

    def parse_call_args(self) -> list:
        self.expect_op("(")
        self.paren += 1
        saved = (self.space_sensitive, self.no_range)
        self.space_sensitive, self.no_range = False, False
        args = []
        while not self.peek().is_op(")"):
            args.append(self.parse_arg())
            if self.peek().is_op(","):
                self.next()
            elif not self.peek().is_op(")"):
                if self.peek().is_op(";"):
                    self.error("unsupported construct: keyword arguments")
                self.error(f"expected ',' or ')', got {self.describe(self.peek())}")
        self.space_sensitive, self.no_range = saved
        self.paren -= 1
        self.next()
        return args

    def parse_arg(self) -> Node:
        t = self.peek()
        if t.is_op("::"):
            self.next()
            e = self.node("::", [None, self.parse_type_expr()], t)
        else:
            e = self.parse_assign()
            if e.head == "=":
                self.error("unsupported construct: keyword arguments", t)
        if self.peek().is_op("..."):
            st = self.next()
            e = self.node("...", [e], st)
        return e

    def parse_curly(self, base: Node) -> Node:
        t = self.expect_op("{")
        self.paren += 1
        saved = self.space_sensitive
        self.space_sensitive = False
        params = []
        while not self.peek().is_op("}"):
            params.append(self.parse_comparison())
            if self.peek().is_op(","):
                self.next()
            elif not self.peek().is_op("}"):
                self.error(f"expected ',' or '}}', got {self.describe(self.peek())}")
        self.space_sensitive = saved
        self.paren -= 1
        self.next()
        return self.node("curly", [base] + params, t)

    def parse_index(self, base: Node) -> Node:
        t = self.expect_op("[")
        self.paren += 1
        saved = self.space_sensitive
        self.space_sensitive = False
        idx = []
        while not self.peek().is_op("]"):
            idx.append(self.parse_arrow())
            if self.peek().is_op(","):
                self.next()
            elif not self.peek().is_op("]"):
                self.error(f"expected ',' or ']', got {self.describe(self.peek())}")
        self.space_sensitive = saved
        self.paren -= 1
        self.next()
        return self.node("ref", [base] + idx, t)

    def parse_primary(self) -> Node:
        t = self.peek()
        if t.kind == "num":
            self.next()
            return self.node("lit", [t.value], t)
        if t.kind == "str":
            self.next()
            return self.node("lit", [t.value], t)
        if t.kind == "id":
            self.next()
            return self.node("id", [t.value], t)
        if t.kind == "kw":
            return self.parse_keyword_expr(t)
        if t.kind == "op":
            if t.value in OPERATOR_NAMES:
                nt = self.peek(1)
                if (nt.is_op("(") and not nt.space_before) or nt.is_op(",", ")"):
                    self.next()
                    return self.node("id", [t.value], t)
            if t.value == "(":
                return self.parse_paren()
            if t.value == "[":
                return self.parse_bracket()
            if t.value == "::":
                self.next()
                return self.node("::", [None, self.parse_type_expr()], t)
            if t.value == "@":
                self.error("unsupported construct: macro call")
            if t.value == ":":
                self.error("unsupported construct: symbol literal")
        self.error(f"unexpected {self.describe(t)}", t)

    def parse_keyword_expr(self, t: Token) -> Node:
        kw = t.value
        if kw in ("true", "false"):
            self.next()
            return self.node("lit", [kw == "true"], t)
        if kw == "if":
            return self.parse_if()
        if kw == "while":
            self.next()
            cond = self.parse_arrow()
            body = self.parse_block()
            self.expect_kw("end")
            return self.node("while", [cond, body], t)
        if kw == "for":
            return self.parse_for()
        if kw == "begin":
            self.next()
            body = self.parse_block()
            self.expect_kw("end")
            return body
        if kw == "quote":
            self.next()
            start = self.toks[self.i].pos
            body = self.parse_block()
            end_tok = self.expect_kw("end")
            return self.node("quote", [body], t, meta=self.src[start:end_tok.pos].strip())
        if kw == "function":
            self.error("unsupported construct: function expression; use x -> ...", t)
        self.error(f"unexpected keyword '{kw}'", t)

    def parse_if(self) -> Node:
        t = self.next()
        cond = self.parse_arrow()
        then = self.parse_block()
        nt = self.next()
        if nt.is_kw("end"):
            return self.node("if", [cond, then], t)
        if nt.is_kw("else"):
            other = self.parse_block()
            self.expect_kw("end")
            return self.node("if", [cond, then, other], t)
        # elseif: reuse the token as a nested if and let it consume the 'end'
        self.i -= 1
        self.toks[self.i] = Token("kw", "if", nt.line, nt.col, nt.pos, nt.end, nt.space_before)
        nested = self.parse_if()
        return self.node("if", [cond, then, self.node("block", [nested], nt)], t)

    def parse_for(self) -> Node:
        t = self.next()
        saved = self.paren
        self.paren = 1
        target = self.parse_postfix() if not self.peek().is_op("(") else self.parse_paren()
        sep = self.next()
        if not (sep.is_kw("in") or sep.is_op("=")):
            self.paren = saved
            self.error("expected 'in' or '=' in for loop", sep)
        self.paren = saved
        it = self.parse_arrow()
        if self.peek().is_op(","):
            self.error("unsupported construct: multiple for-loop ranges")
        body = self.parse_block()
        self.expect_kw("end")
        return self.node("for", [target, it, body], t)

    def parse_paren(self) -> Node:
        t = self.expect_op("(")
        self.paren += 1
        saved = (self.space_sensitive, self.no_range)
        self.space_sensitive, self.no_range = False, False
        items = []
        trailing_comma = False
        while not self.peek().is_op(")"):
            items.append(self.parse_arg())
            trailing_comma = False
            if self.peek().is_op(","):
                self.next()
                trailing_comma = True
            elif self.peek().is_op(";"):
                self.error("unsupported construct: block in parentheses")
            elif not self.peek().is_op(")"):
                self.error(f"expected ',' or ')', got {self.describe(self.peek())}")
        self.space_sensitive, self.no_range = saved
        self.paren -= 1
        self.next()
        if len(items) == 1 and not trailing_comma and items[0].head != "...":
            return items[0]
        return self.node("tuple", items, t)

    def parse_bracket(self) -> Node:
        t = self.expect_op("[")
        saved = (self.space_sensitive, self.paren, self.no_range)
        self.space_sensitive, self.paren, self.no_range = True, 0, False
        rows = [[]]
        commas = False
        while True:
            nt = self.peek()
            if nt.is_op("]"):
                break
            if nt.kind == "nl" or nt.is_op(";"):
                self.next()
                if rows[-1]:
                    rows.append([])
                continue
            if nt.is_op(","):
                self.next()
                commas = True
                while self.peek().kind == "nl":
                    self.next()
                continue
            if nt.kind == "eof":
                self.error("unterminated '['", t)
            e = self.parse_arrow()
            if self.peek().is_op("..."):
                self.error("unsupported construct: splat in array literal")
            rows[-1].append(e)
        self.space_sensitive, self.paren, self.no_range = saved
        self.next()
        if not rows[-1]:
            rows.pop()
        if commas:
            if len(rows) > 1:
                self.error("cannot mix ',' and ';' in array literal", t)
            return self.node("vcat", rows[0] if rows else [], t)
        if not rows:
            return self.node("vcat", [], t)
        if all(len(r) == 1 for r in rows):
            return self.node("vcat", [r[0] for r in rows], t)
        if len(rows) == 1:
            return self.node("hcat", rows[0], t)
        return self.node("hvcat", rows, t)
