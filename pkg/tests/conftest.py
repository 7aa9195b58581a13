import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE = {}


def _line(key, title, passed, detail):
    number, part = key
    label = f"{number}{part}"
    return f"criterion {label:>3} [{'PASS' if passed else 'FAIL'}] {title}: {detail}"


class _Recorder:
    def __call__(self, number, title, passed, detail="", part=""):
        key = (number, part)
        _ACCEPTANCE[key] = (title, bool(passed), detail)
        print(_line(key, title, passed, detail))
        return passed


@pytest.fixture
def criterion():
    """Records one pass/fail line per acceptance criterion."""
    return _Recorder()


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_line(key, *_ACCEPTANCE[key]))
