"""Shared fixtures and the acceptance summary printed at the end of a run."""

import numpy as np
import pytest

from studd.stream import generate_synthetic, boundary_concentration_spec

_criteria: dict[int, dict] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    entry = _criteria.setdefault(props["criterion"], {"title": props.get("title", ""),
                                                      "ok": True, "details": []})
    entry["ok"] &= report.outcome == "passed"
    if "detail" in props:
        entry["details"].append(props["detail"])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for k in sorted(_criteria):
        e = _criteria[k]
        tr.write_line(f"criterion {k}: {'PASS' if e['ok'] else 'FAIL'}  {e['title']}")
        for d in e["details"]:
            tr.write_line(f"    {d}")


@pytest.fixture
def criterion(request, record_property):
    """Tag a test with an acceptance criterion: ``criterion(4, "title")``.

    Returns a ``detail(text)`` callable that attaches measured values to the
    summary line.
    """
    def tag(number: int, title: str):
        record_property("criterion", number)
        record_property("title", title)

        def detail(text: str):
            record_property("detail", text)
        return detail
    return tag


@pytest.fixture(scope="session")
def drift_stream():
    """Small boundary-concentration stream: W=300 scale, drift at 1500."""
    return generate_synthetic(
        boundary_concentration_spec(7, n_instances=3600, drift_point=1500), name="bc_small")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
