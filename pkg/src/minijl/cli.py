"""Command-line entry point: ``mini run|repl|infer|lattice|check-ambiguities``."""

from __future__ import annotations

import argparse
import io
import sys
import threading

from .frontend import ParseError, lower_toplevel, parse
from .frontend.lower import MethodItem, ThunkItem
from .ir import dump
from .lattice import intersect, morespecific, subtype, union
from .optimize import PASSES
from .runtime import Context, Options
from .types import AnyType, is_concrete, show
from .values import MiniError, show_value

STACK_SIZE = 512 * 1024 * 1024


def _add_common(p, suppress: bool):
    # subcommand copies default to SUPPRESS so flags given before the subcommand survive
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    p.add_argument("--no-heuristics", action="store_true", default=d(False),
                   help="disable signature widening and dummy cache entries")
    p.add_argument("--no-boot", action="store_true", default=d(False),
                   help="start without the boot library")
    p.add_argument("--no-optimize", action="store_true", default=d(False),
                   help="skip IR optimization passes")
    p.add_argument("--stats", action="store_true", default=d(False),
                   help="print counters as key=value lines")
    p.add_argument("--union-cutoff", type=int, default=d(4), metavar="N")
    p.add_argument("--tuple-depth", type=int, default=d(3), metavar="N")
    p.add_argument("--tuple-len", type=int, default=d(8), metavar="N")
    p.add_argument("--dump-ir", action="store_true", default=d(False),
                   help="print IR instead of running")
    p.add_argument("--after", choices=PASSES, default=d(None), metavar="PASS",
                   help="with --dump-ir: run, then print IR after this pass")
    p.add_argument("--infer-dump", action="store_true", default=d(False),
                   help="print statements annotated with inferred types")
    p.add_argument("--check-inference", action="store_true", default=d(False),
                   help="check every value against its inferred type")
    p.add_argument("--dispatch-oracle", action="store_true", default=d(False),
                   help="compare cached dispatch with the slow path")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mini")
    _add_common(p, False)
    sub = p.add_subparsers(dest="cmd", required=True)

    def cmd(name, help):
        c = sub.add_parser(name, help=help)
        _add_common(c, True)
        return c

    cmd("run", "run a program").add_argument("file")
    cmd("repl", "interactive session")
    i = cmd("infer", "infer every method of a program")
    i.add_argument("file")
    i.add_argument("--dump", action="store_true", help="show annotated statements")
    lat = cmd("lattice", "lattice queries")
    lsub = lat.add_subparsers(dest="lcmd", required=True)
    chk = lsub.add_parser("check", help="relate two types")
    _add_common(chk, True)
    chk.add_argument("a")
    chk.add_argument("b")
    cmd("check-ambiguities", "report ambiguous methods").add_argument("file")
    return p


def options_from(ns) -> Options:
    return Options(heuristics=not ns.no_heuristics, boot=not ns.no_boot,
                   optimize=not ns.no_optimize, union_cutoff=ns.union_cutoff,
                   tuple_depth=ns.tuple_depth, tuple_len=ns.tuple_len,
                   check_inference=ns.check_inference, dispatch_oracle=ns.dispatch_oracle)


class Session:
    def __init__(self, ns, out, diag):
        self.ns = ns
        self.out = out
        self.diag = diag
        self.ctx = Context(options_from(ns), out, diag)
        self.boot = {id(m) for m in self.ctx.all_methods()}

    def user_specs(self):
        """(method, spec) pairs for methods defined after boot, in definition order."""
        for m in self.ctx.all_methods():
            if id(m) in self.boot:
                continue
            for spec in m.specs.values():
                yield m, spec
            for gm in m.expansions.values():
                for spec in gm.specs.values():
                    yield gm, spec
        for spec in self.ctx.thunk_specs:
            yield spec.method, spec

    def all_specs(self):
        for m in self.ctx.all_methods():
            yield from m.specs.values()
            for gm in m.expansions.values():
                yield from gm.specs.values()
        yield from self.ctx.thunk_specs

    def annotated(self, spec) -> str:
        types = spec.types
        return dump(spec.code, lambda p: show(types[p]) if p in types else None)

    def stats(self):
        n = typed = concrete = 0
        for spec in self.all_specs():
            for t in spec.types.values():
                n += 1
                if t is not AnyType:
                    typed += 1
                if is_concrete(t):
                    concrete += 1
        lines = [f"{k}={v}" for k, v in sorted(self.ctx.stats.items())]
        lines.append(f"expressions={n}")
        lines.append(f"typed={typed}")
        lines.append(f"typed_pct={100.0 * typed / n if n else 0.0:.1f}")
        lines.append(f"concrete={concrete}")
        lines.append(f"concrete_pct={100.0 * concrete / n if n else 0.0:.1f}")
        lines.append(f"violations={len(self.ctx.violations)}")
        lines.append(f"oracle_mismatches={len(self.ctx.oracle_mismatches)}")
        self.diag.write("\n".join(lines) + "\n")


def cmd_run(s: Session, source: str):
    ns = s.ns
    if ns.dump_ir and not ns.after:
        for item in lower_toplevel(source, {}):
            if isinstance(item, (MethodItem, ThunkItem)):
                s.out.write(dump(item.code) + "\n")
        return
    s.ctx.eval_source(source)
    if ns.dump_ir:
        for m, spec in s.user_specs():
            code = spec.stages.get(ns.after)
            if code is not None:
                s.out.write(f"# {m!r} at {show(spec.argtypes)}\n{dump(code)}\n")
    if ns.infer_dump:
        for m, spec in s.user_specs():
            s.out.write(f"# {m!r} at {show(spec.argtypes)} :: {show(spec.rettype)}\n")
            s.out.write(s.annotated(spec) + "\n")


def cmd_infer(s: Session, source: str, detail: bool):
    from .runtime import Specialization
    ctx = s.ctx
    quiet = io.StringIO()
    ctx.out = quiet
    ctx.eval_source(source)
    for m in list(ctx.all_methods()):
        if id(m) in s.boot or m.staged:
            continue
        spec = Specialization(m, m.sig, m.code)
        ctx.inferencer.annotate(spec)
        s.out.write(f"{m!r} :: {show(spec.rettype)}\n")
        if detail:
            s.out.write(s.annotated(spec) + "\n")


def cmd_lattice(s: Session, a: str, b: str):
    ta = _type_expr(s.ctx, a)
    tb = _type_expr(s.ctx, b)
    w = s.out.write
    w(f"subtype({show(ta)}, {show(tb)}) = {str(subtype(ta, tb)).lower()}\n")
    w(f"subtype({show(tb)}, {show(ta)}) = {str(subtype(tb, ta)).lower()}\n")
    w(f"intersection = {show(intersect(ta, tb))}\n")
    w(f"union = {show(union(ta, tb))}\n")
    w(f"morespecific({show(ta)}, {show(tb)}) = {str(morespecific(ta, tb)).lower()}\n")
    w(f"morespecific({show(tb)}, {show(ta)}) = {str(morespecific(tb, ta)).lower()}\n")


def _type_expr(ctx, text: str):
    tree = parse(text)
    if len(tree.args) != 1:
        raise ParseError("expected one type expression", 1, 1)
    return ctx.eval_type(tree.args[0], {})


def cmd_check_ambiguities(s: Session, source: str):
    ctx = s.ctx
    ctx.out = io.StringIO()
    ctx.diag = io.StringIO()
    start = len(ctx.warnings)
    ctx.eval_source(source)
    for w in ctx.warnings[start:]:
        s.out.write(w + "\n")


def cmd_repl(s: Session, stdin):
    ctx = s.ctx
    buf = []
    interactive = stdin.isatty()
    while True:
        if interactive:
            s.out.write("mini> " if not buf else "  ... ")
            s.out.flush()
        line = stdin.readline()
        if not line:
            break
        buf.append(line)
        text = "".join(buf)
        try:
            parse(text)
        except ParseError as e:
            if "end of input" in str(e):
                continue
            s.diag.write(f"ERROR: {e}\n")
            buf = []
            continue
        buf = []
        try:
            ctx.eval_source(text, echo=lambda v: _echo(s, v))
        except MiniError as e:
            s.diag.write(f"ERROR: {e}\n")
        s.out.flush()


def _echo(s: Session, v):
    spec = s.ctx.thunk_specs[-1] if s.ctx.thunk_specs else None
    t = f" :: {show(spec.rettype)}" if spec is not None else ""
    s.out.write(f"{show_value(v)}{t}\n")


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def run(argv, out=None, diag=None, stdin=None) -> int:
    out = out or sys.stdout
    diag = diag or sys.stderr
    ns = build_parser().parse_args(argv)
    s = None
    try:
        s = Session(ns, out, diag)
        if ns.cmd == "run":
            cmd_run(s, _read(ns.file))
        elif ns.cmd == "infer":
            cmd_infer(s, _read(ns.file), ns.dump or ns.infer_dump)
        elif ns.cmd == "lattice":
            cmd_lattice(s, ns.a, ns.b)
        elif ns.cmd == "check-ambiguities":
            cmd_check_ambiguities(s, _read(ns.file))
        else:
            cmd_repl(s, stdin or sys.stdin)
    except ParseError as e:
        diag.write(f"ERROR: {e}\n")
        return 2
    except MiniError as e:
        diag.write(f"ERROR: {e}\n")
        if ns.stats and s is not None:
            s.stats()
        return 1
    except OSError as e:
        diag.write(f"ERROR: {e}\n")
        return 1
    if ns.stats:
        s.stats()
    return 0


def main(argv=None) -> int:
    """Run in a thread with a large stack; deep recursion in user code is common."""
    sys.setrecursionlimit(200000)
    threading.stack_size(STACK_SIZE)
    result = [1]

    def target():
        result[0] = run(sys.argv[1:] if argv is None else argv)

    t = threading.Thread(target=target)
    t.start()
    t.join()
    code = result[0]
    if argv is None:
        sys.exit(code)
    return code


if __name__ == "__main__":
    main()
