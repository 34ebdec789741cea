import pytest

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion(request):
    """Collects one summary line per acceptance criterion."""

    def report(number: int, passed: bool, detail: str, seconds: float, limit: float):
        status = "PASS" if passed else "FAIL"
        ACCEPTANCE_LINES.append(
            f"criterion {number:2d}: {status}  {detail}  [{seconds:.2f}s / limit {limit:g}s]")

    return report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
