import time
from dataclasses import dataclass
from pathlib import Path

import pytest

from lunar_doppler.cli import cmd_run_all

_ACCEPTANCE_LINES: list[str] = []


@dataclass
class PipelineRun:
    root: Path
    seconds: float

    @property
    def sim(self) -> Path:
        return self.root / "sim"

    @property
    def fit(self) -> Path:
        return self.root / "fit"

    @property
    def eval(self) -> Path:
        return self.root / "eval"


def _timed_run(root: Path) -> PipelineRun:
    start = time.perf_counter()
    cmd_run_all(None, root)
    return PipelineRun(root, time.perf_counter() - start)


@pytest.fixture(scope="session")
def default_run(tmp_path_factory) -> PipelineRun:
    """One full default pipeline run (simulate, fit, evaluate), shared by the slow tests."""
    return _timed_run(tmp_path_factory.mktemp("default_run"))


@pytest.fixture(scope="session")
def default_rerun(tmp_path_factory, default_run) -> PipelineRun:
    return _timed_run(tmp_path_factory.mktemp("default_rerun"))


@pytest.fixture
def acceptance_report():
    def report(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
