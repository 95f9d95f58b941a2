import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion at the end of the run."""
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance.py" in nodeid and "::" in nodeid:
                rows.append((nodeid.split("::")[-1], outcome))
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    extra = {}
    module = sys.modules.get("tests.test_acceptance") or sys.modules.get("test_acceptance")
    if module is not None:
        extra = getattr(module, "SUMMARY_NOTES", {})
    for name, outcome in sorted(rows):
        status = "PASS" if outcome == "passed" else "FAIL"
        line = f"{status} {name}"
        if name in extra:
            line += f"  [{extra[name]}]"
        terminalreporter.write_line(line)
