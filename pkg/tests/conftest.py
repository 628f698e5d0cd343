import sys

from hypothesis import settings

# property tests run numerical quadrature and series; timing varies too much for a deadline
settings.register_profile("numeric", deadline=None, max_examples=50)
settings.load_profile("numeric")


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
