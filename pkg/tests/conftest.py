import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=30, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE: dict[str, tuple[bool, str]] = {}
EXCLUDED = {"10": "hardware counts and detector dark-count floor; not reproducible in simulation"}


@pytest.fixture
def record_criterion():
    """Store one pass/fail line per acceptance criterion for the session summary."""

    def record(key: str, ok: bool, detail: str) -> None:
        prev = ACCEPTANCE.get(key)
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}"
        ACCEPTANCE[key] = (ok, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {key}: {detail}")
    for key, reason in EXCLUDED.items():
        terminalreporter.write_line(f"[EXCLUDED] criterion {key}: {reason}")
