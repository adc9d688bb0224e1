import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lascl.corpus import generate_synthetic  # noqa: E402
from lascl.hierarchy import TemplateSpec  # noqa: E402

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def synthetic():
    return generate_synthetic()


@pytest.fixture(scope="session")
def template():
    return TemplateSpec("It contains {label} news.")


@pytest.fixture
def record():
    """Record one acceptance line: ``record(key, passed, detail)``."""
    def _record(key: str, passed: bool, detail: str = ""):
        ACCEPTANCE[key] = (bool(passed), detail)
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: [int(p) if p.isdigit() else p for p in k.replace(".", " ").split()]):
        passed, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {key}  {detail}")
