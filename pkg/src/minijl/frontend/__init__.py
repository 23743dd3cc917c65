"""Surface syntax: lexer, parser and lowering to IR."""

from .lexer import ParseError
from .parser import parse
from .lower import lower_toplevel

__all__ = ["ParseError", "parse", "lower_toplevel"]
