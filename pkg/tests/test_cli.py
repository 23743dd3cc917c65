import io
import subprocess
import sys

import pytest

from minijl.cli import run as cli_run
from conftest import ROOT


def mini(*argv, stdin=None):
    out, diag = io.StringIO(), io.StringIO()
    code = cli_run(list(argv), out, diag, stdin)
    return code, out.getvalue(), diag.getvalue()


@pytest.fixture
def prog(tmp_path):
    def make(text):
        p = tmp_path / "p.jl"
        p.write_text(text)
        return str(p)
    return make


def test_run_ok(prog):
    assert mini("run", prog("println(1 + 2.5)\n")) == (0, "3.5\n", "")


def test_uncaught_error_exit_1(prog):
    code, out, diag = mini("run", prog('println("a")\nerror("boom")\nprintln("b")\n'))
    assert (code, out) == (1, "a\n")
    assert diag == "ERROR: boom\n"


def test_parse_error_exit_2(prog):
    code, out, diag = mini("run", prog("x = (\n"))
    assert code == 2 and out == ""
    assert diag.startswith("ERROR:")


def test_stats_key_value(prog):
    code, _, diag = mini("run", "--stats", prog("println(1 + 2.5)\n"))
    assert code == 0
    kv = dict(line.split("=", 1) for line in diag.splitlines())
    for key in ("expressions", "typed", "typed_pct", "concrete", "concrete_pct", "specializations"):
        assert key in kv
    assert int(kv["typed"]) <= int(kv["expressions"])


def test_global_flag_before_subcommand(prog):
    code, _, diag = mini("--stats", "--no-heuristics", "run", prog("1\n"))
    assert code == 0 and "expressions=" in diag


def test_dump_ir_golden(prog):
    code, out, _ = mini("run", "--dump-ir", prog("f(x) = x + 1\n"))
    assert out == "function f(x)\n  1: (return (call + x 1))\nend\n"


def test_dump_ir_after_pass(prog):
    code, out, _ = mini("run", "--dump-ir", "--after=inline", prog("sq(x) = x * x\nsq(3)\n"))
    assert code == 0
    assert "# sq(Any) at (Int64,)" in out
    assert "mul_int" in out


def test_infer_dump(prog):
    code, out, _ = mini("run", "--infer-dump", prog("sq(x) = x * x\nsq(3)\n"))
    assert ":: Int64" in out


def test_infer_subcommand(prog):
    code, out, _ = mini("infer", prog("fib(n::Int64) = n < 2 ? n : fib(n-1) + fib(n-2)\n"))
    assert out == "fib(Int64) :: Int64\n"
    code, out, _ = mini("infer", "--dump", prog("g(x::Int64) = x\n"))
    assert "(return x) :: Int64" in out


def test_lattice_check():
    code, out, _ = mini("lattice", "check", "Union(Int32,String)", "Number")
    assert code == 0
    assert "intersection = Int32" in out
    assert "subtype(Union(Int32,String), Number) = false" in out


def test_lattice_without_boot():
    code, out, _ = mini("--no-boot", "lattice", "check", "(Int64,)", "(Any...)")
    assert code == 0
    assert "subtype((Int64,), (Any...)) = true" in out


def test_check_ambiguities():
    code, out, _ = mini("check-ambiguities", str(ROOT / "programs" / "ambiguity.jl"))
    assert out == ("Warning: New definition foo(Any,Int64) is ambiguous with foo(Int64,Any). "
                   "Make sure foo(Int64,Int64) is defined first.\n")


def test_repl_echoes_value_and_type():
    stdin = io.StringIO("x = 2\nx + 0.5\nfunction f(y)\n  y * 2\nend\nf(x)\nerror(\"no\")\nf(3)\n")
    code, out, diag = mini("repl", stdin=stdin)
    assert code == 0
    # x is a non-constant global, so only its run-time value is known
    assert out.splitlines() == ["2.5 :: Any", "4 :: Any", "6 :: Int64"]
    assert "ERROR: no" in diag


def test_console_script_entry():
    r = subprocess.run([sys.executable, "-m", "minijl.cli", "lattice", "check", "Int64", "Number"],
                       capture_output=True, text=True)
    assert r.returncode == 0
    assert "subtype(Int64, Number) = true" in r.stdout
