from __future__ import annotations

import pytest

_ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def acceptance(request):
    """Record one acceptance criterion; the verdict is printed in the terminal summary."""
    def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.append((number, title, bool(ok), detail))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(_ACCEPTANCE):
        line = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {title}"
        terminalreporter.write_line(line + (f"  ({detail})" if detail else ""))
