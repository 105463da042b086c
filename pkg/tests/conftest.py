"""Shared pytest hooks.

Tests marked ``criterion(number, title)`` get exactly one summary line on
the terminal. The line is printed from the report hook, so it appears
whether the test passes or fails and wherever the failure happens.
"""

import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "criterion(number, title): print a PASS/FAIL summary line for this test",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    setup_failed = report.when == "setup" and not report.passed
    if report.when != "call" and not setup_failed:
        return
    number, title = marker.args
    status = "PASS" if report.passed else "FAIL"
    line = f"criterion {number:02d} ({title}): {status}"
    writer = item.config.pluginmanager.get_plugin("terminalreporter")
    if writer is None:
        print(line)
        return
    writer.ensure_newline()
    writer.write_line(line)
