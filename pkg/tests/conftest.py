import io
import sys
from pathlib import Path

import pytest

sys.setrecursionlimit(20000)
sys.path.insert(0, str(Path(__file__).parent))

from minijl.runtime import Context, Options, run_source  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent
PROGRAMS = sorted((ROOT / "programs").glob("*.jl"))


def run(src: str, **opts):
    """(stdout text, diagnostics text, context)."""
    return run_source(src, Options(**opts))


def fresh_ctx(**opts) -> Context:
    return Context(Options(**opts), io.StringIO(), io.StringIO())


@pytest.fixture(scope="session")
def boot_ctx():
    return fresh_ctx()


@pytest.fixture(scope="session")
def T(boot_ctx):
    """Parse a surface type expression against the boot environment."""
    from termgen import to_type
    return lambda text: to_type(boot_ctx, text)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
