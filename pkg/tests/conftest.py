import json
from pathlib import Path

import pytest

DATA = Path(__file__).parent / "data"


def read_smiles(name):
    return [l.split()[0] for l in (DATA / name).read_text().splitlines() if l.strip()]


@pytest.fixture(scope="session")
def corpus500():
    return read_smiles("corpus500.smi")


@pytest.fixture(scope="session")
def learn50():
    return read_smiles("learn50.smi")


@pytest.fixture(scope="session")
def stereo_fixtures():
    return json.loads((DATA / "stereo_fixtures.json").read_text())


# acceptance criteria report one line each; collected here and echoed in the summary
CRITERIA: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
