"""Shared test configuration.

The acceptance tests (tests/test_acceptance.py) each carry a CRITERION
docstring line; after the run, one PASS/FAIL line per criterion is printed
so the acceptance sheet can be read off the pytest output directly.
"""

import re

from hypothesis import HealthCheck, settings

settings.register_profile(
    "workbench",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("workbench")

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")


def _criterion_lines(terminalreporter):
    rows = {}
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            m = _CRITERION_RE.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            num = int(m.group(1))
            verdict = "PASS" if status == "passed" else "FAIL"
            # keep the worst verdict if a criterion has several phases
            if rows.get(num, (None, "PASS"))[1] != "FAIL":
                rows[num] = (rep.nodeid.split("::")[-1], verdict)
    return rows


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = _criterion_lines(terminalreporter)
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(rows):
        name, verdict = rows[num]
        label = name.replace(f"test_criterion_{num:02d}_", "").replace("_", " ")
        terminalreporter.write_line(f"ACCEPTANCE {num:02d} {verdict:4s} {label}")
