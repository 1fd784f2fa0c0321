import numpy as np
import pytest

from mivarnet.phantom import gen_coil_maps, gen_phantom


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def phantom64():
    return gen_phantom(7, 64, 64, 6)


@pytest.fixture
def maps64():
    return gen_coil_maps(3, 4, 64, 64)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def inner(a, b):
    return np.vdot(a.ravel(), b.ravel())


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when not in ("setup", "call"):
        return
    n, title = marker.args
    entry = _CRITERIA.setdefault(n, {"title": title, "ok": True, "notes": []})
    if report.failed:
        entry["ok"] = False
        msg = str(report.longrepr).strip().splitlines()
        entry["notes"].append(msg[-1] if msg else "failed")
    for key, value in item.user_properties:
        if key == "detail":
            entry["notes"].append(value)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        e = _CRITERIA[n]
        notes = "; ".join(dict.fromkeys(e["notes"]))
        terminalreporter.write_line(f"criterion {n}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}" + (f"  [{notes}]" if notes else ""))
