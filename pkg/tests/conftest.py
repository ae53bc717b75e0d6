import numpy as np
import pytest

from scalesim.core import ScaleRecord

ET_MAJOR = [200.0, 200.0, 100.0, 200.0, 200.0, 200.0, 100.0]
JI_MAJOR = [204.0, 182.0, 112.0, 204.0, 182.0, 204.0, 112.0]


def record(sid, intervals, culture="X", region="R", source_kind="Theory"):
    return ScaleRecord(sid, sid, culture, region, source_kind, tuple(intervals))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_db():
    """A handful of records spanning N=5 and N=7."""
    return [
        record("et7", ET_MAJOR),
        record("ji7", JI_MAJOR),
        record("minor", [200, 100, 200, 200, 100, 200, 200]),
        record("pelog", [120, 150, 270, 130, 110, 150, 270]),
        record("pent", [200, 200, 300, 200, 300]),
        record("slendro", [240, 240, 240, 240, 240]),
        record("pent_ji", [204, 182, 316, 204, 294]),
    ]


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
