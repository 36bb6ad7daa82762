import numpy as np
import pytest

from dirdep.checkerboard import random_checkerboard


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_cbs():
    gen = np.random.default_rng(99)
    return [random_checkerboard(int(gen.integers(2, 25)), gen) for _ in range(12)]


_ACCEPTANCE = pytest.StashKey[dict]()


def _criterion_of(item):
    mark = item.get_closest_marker("criterion")
    return None if mark is None else mark.args[0]


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    crit = _criterion_of(item)
    if crit is None:
        return
    table = item.config.stash.setdefault(_ACCEPTANCE, {})
    entry = table.setdefault(crit, {"ok": True, "details": [], "failed": []})
    if report.when == "call" or (report.when == "setup" and not report.passed):
        if not report.passed:
            entry["ok"] = False
            entry["failed"].append(item.name)
        entry["details"].extend(v for k, v in item.user_properties if k == "detail")



def pytest_terminal_summary(terminalreporter, config):
    table = config.stash.get(_ACCEPTANCE, None)
    if not table:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(table):
        entry = table[crit]
        status = "PASS" if entry["ok"] else "FAIL"
        detail = "; ".join(dict.fromkeys(entry["details"]))
        if entry["failed"]:
            detail += f"  [failed: {', '.join(entry['failed'])}]"
        terminalreporter.write_line(f"{status} criterion {crit}: {detail}")
