import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dibias.process_model import STRUCTURE_DEFAULTS, get_structure, sample_structured_model  # noqa: E402


def structured(name, seed):
    alphabet, d = STRUCTURE_DEFAULTS[name]
    return sample_structured_model(get_structure(name), alphabet, d, seed)


@pytest.fixture
def quiet():
    """Silence the small-sample and k < d warnings for a test."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


VERDICTS = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(VERDICTS, [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
