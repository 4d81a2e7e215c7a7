from hypothesis import settings

settings.register_profile("repro", derandomize=True, deadline=None)
settings.load_profile("repro")

_CRITERIA: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> str:
    line = f"CRITERION {number:2d} {'PASS' if passed else 'FAIL'}  {detail}"
    print(line)
    _CRITERIA.append(line)
    return line


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)
