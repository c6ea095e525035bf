import numpy as np
import pytest

from dictid.model import Dictionary

# criterion number -> (title, passed, detail), filled by test_acceptance.py
ACCEPTANCE = {}


def record(number, title, passed, detail=""):
    ACCEPTANCE[number] = (title, bool(passed), detail)
    line = f"[acceptance {number:2d}] {'PASS' if passed else 'FAIL'}  {title}  {detail}"
    print(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(
            f"[acceptance {number:2d}] {'PASS' if passed else 'FAIL'}  {title}  {detail}"
        )


@pytest.fixture
def identity2():
    return Dictionary(np.eye(2))


@pytest.fixture
def worked_X():
    return np.array([[2.0, 0.0, 1.0, 0.0], [0.0, 1.0, 1.0, -1.0]])
