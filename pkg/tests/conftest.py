import pytest

from antimaser.config import fixture_path, netlist_from_dict, read_json
from antimaser.yfactor import record_from_dict

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def measurements():
    d = read_json(fixture_path("yfactor_measurements"))
    net = netlist_from_dict(d["chain"])
    recs = {r["label"]: record_from_dict(r, i) for i, r in enumerate(d["measurements"], start=1)}
    return d, net, recs
