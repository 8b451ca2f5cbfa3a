from hypothesis import settings

# fixed example sequence so every run of the suite sees the same cases
settings.register_profile("repro", derandomize=True, print_blob=True)
settings.load_profile("repro")

# filled by test_acceptance.py, one line per criterion
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
