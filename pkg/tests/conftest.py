import numpy as np
import pytest
from hypothesis import settings

from asced.codes import build_toric, code_from_spec

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def toric2():
    return build_toric(2)


@pytest.fixture(scope="session")
def toric3():
    return build_toric(3)


@pytest.fixture(scope="session")
def toric4():
    return build_toric(4)


@pytest.fixture(scope="session")
def gb46():
    return code_from_spec("gb_46_2_9")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def gf2_rank_oracle(m):
    """Rank over F2 with rows as Python integers; independent of the packed kernel."""
    rows = [int("".join(str(int(b)) for b in r), 2) if len(r) else 0 for r in np.asarray(m)]
    rank = 0
    while rows:
        pivot = rows.pop()
        if pivot == 0:
            continue
        rank += 1
        top = pivot.bit_length() - 1
        rows = [r ^ pivot if (r >> top) & 1 else r for r in rows]
    return rank


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
