import sys


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    n_pass = sum(line.startswith("[PASS]") for line in lines)
    terminalreporter.write_line(f"{n_pass}/{len(lines)} criteria passed")
