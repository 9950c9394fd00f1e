import re


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, whether or not output was captured."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_criterion_(\d+)", rep.nodeid)
            if rep.when != "call" or not m:
                continue
            details = [v for k, v in rep.user_properties if k == "criterion"]
            detail = details[-1] if details else "did not complete"
            lines.append((int(m.group(1)), f"criterion {int(m.group(1)):>2}: "
                                           f"{'PASS' if outcome == 'passed' else 'FAIL'}  {detail}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
