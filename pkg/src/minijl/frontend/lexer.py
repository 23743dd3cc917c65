from __future__ import annotations

import re
from dataclasses import dataclass


class ParseError(Exception):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        super().__init__(f"{msg} (line {line}, column {col})" if line else msg)
        self.msg = msg
        self.line = line
        self.col = col


KEYWORDS = {
    "function", "end", "if", "elseif", "else", "while", "for", "in", "return",
    "global", "local", "const", "type", "immutable", "abstract", "bitstype",
    "quote", "begin", "break", "continue", "true", "false",
}

# constructs we recognize only to reject them by name
UNSUPPORTED = {"module", "import", "using", "try", "catch", "macro", "let",
               "do", "typealias", "export", "importall", "baremodule"}

OPERATORS = sorted("""
... //= += -= *= /= ^= == != <= >= <: -> && || :: // = + - * / ^ % < > ! ? : , ; ( ) [ ] { } . @ & | $ '
""".split(), key=len, reverse=True)


@dataclass
class Token:
    kind: str          # id, kw, num, str, op, nl, eof
    value: object
    line: int
    col: int
    pos: int
    end: int
    space_before: bool = False

    def is_op(self, *ops) -> bool:
        return self.kind == "op" and self.value in ops

    def is_kw(self, *kws) -> bool:
        return self.kind == "kw" and self.value in kws


_NUM = re.compile(r"(\d+\.\d*(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|0x[0-9a-fA-F]+|\d+)")
_ID = re.compile(r"[A-Za-z_][A-Za-z_0-9]*!?")
_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", '"': '"', "0": "\0", "r": "\r", "$": "$"}


def tokenize(src: str) -> list:
    toks = []
    i, line, lstart = 0, 1, 0
    n = len(src)
    space = False
    while i < n:
        c = src[i]
        col = i - lstart + 1
        if c in " \t\r":
            i += 1
            space = True
            continue
        if c == "#":
            if src.startswith("#=", i):
                raise ParseError("unsupported construct: block comment", line, col)
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c == "\n":
            toks.append(Token("nl", "\n", line, col, i, i + 1, space))
            i += 1
            line += 1
            lstart = i
            space = True
            continue
        if c == '"':
            j = i + 1
            buf = []
            while j < n and src[j] != '"':
                ch = src[j]
                if ch == "\\":
                    esc = src[j + 1] if j + 1 < n else ""
                    if esc not in _ESCAPES:
                        raise ParseError(f"invalid escape \\{esc}", line, j - lstart + 1)
                    buf.append(_ESCAPES[esc])
                    j += 2
                    continue
                if ch == "$":
                    raise ParseError("unsupported construct: string interpolation",
                                     line, j - lstart + 1)
                if ch == "\n":
                    raise ParseError("unterminated string", line, col)
                buf.append(ch)
                j += 1
            if j >= n:
                raise ParseError("unterminated string", line, col)
            toks.append(Token("str", "".join(buf), line, col, i, j + 1, space))
            i = j + 1
            space = False
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            m = _NUM.match(src, i)
            text = m.group(0)
            # "1." followed by an operator char like "1.+" is not handled; 1:n is
            if text.endswith(".") and i + len(text) < n and src[i + len(text)] == ".":
                text = text[:-1]
            if text.startswith("0x"):
                val = int(text, 16)
            elif any(ch in text for ch in ".eE"):
                val = float(text)
            else:
                val = int(text)
            toks.append(Token("num", val, line, col, i, i + len(text), space))
            i += len(text)
            space = False
            continue
        m = _ID.match(src, i)
        if m:
            word = m.group(0)
            if word.endswith("!") and src.startswith("=", m.end()):
                word = word[:-1]
            if word in UNSUPPORTED:
                raise ParseError(f"unsupported construct: {word}", line, col)
            kind = "kw" if word in KEYWORDS else "id"
            toks.append(Token(kind, word, line, col, i, i + len(word), space))
            i += len(word)
            space = False
            continue
        for op in OPERATORS:
            if src.startswith(op, i):
                if op in ("$", "'"):
                    raise ParseError(f"unsupported construct: {op}", line, col)
                toks.append(Token("op", op, line, col, i, i + len(op), space))
                i += len(op)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
        space = False
    toks.append(Token("eof", None, line, i - lstart + 1, n, n, True))
    return toks
