RESULTS: list[str] = []


def record(number: int, passed: bool, detail: str) -> None:
    """Store one pass/fail line for an acceptance criterion and echo it."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    RESULTS.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
