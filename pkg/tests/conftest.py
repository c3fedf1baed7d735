import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("repo", deadline=None, derandomize=True, max_examples=200)
settings.load_profile("repo")


@pytest.fixture
def rng():
    return np.random.default_rng(20250421)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: dict[str, list[str]] = {}


def record(criterion: str, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.setdefault(criterion, []).append(("PASS" if ok else "FAIL") + "  " + detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k.split()[0])):
        lines = ACCEPTANCE_LINES[key]
        status = "PASS" if all(l.startswith("PASS") for l in lines) else "FAIL"
        terminalreporter.write_line(f"[{status}] criterion {key}")
        for l in lines:
            terminalreporter.write_line(f"        {l}")
