import json
import sys
from pathlib import Path

import hypothesis
import pytest

from cexrepair.verifier import (
    Successful,
    VerifierConfig,
    parse_verifier_output,
)

hypothesis.settings.register_profile("ci", deadline=None)
hypothesis.settings.load_profile("ci")

FIXTURES = Path(__file__).parent / "fixtures"
SAMPLES = Path(__file__).parents[1] / "src" / "cexrepair" / "samples"
FAKE_ESBMC = FIXTURES / "fake_esbmc.py"


def read_fixture(name: str) -> str:
    return (FIXTURES / name).read_text()


@pytest.fixture
def r_c_output():
    return read_fixture("r_c_output.txt")


@pytest.fixture
def gpt661_output():
    return read_fixture("gpt661_output.txt")


@pytest.fixture
def fake_cfg():
    return VerifierConfig(binary_path=str(FAKE_ESBMC), timeout=5.0)


@pytest.fixture
def fake_log(tmp_path, monkeypatch):
    log = tmp_path / "fake_esbmc.log"
    monkeypatch.setenv("FAKE_ESBMC_LOG", str(log))

    def calls():
        if not log.exists():
            return []
        return [json.loads(l) for l in log.read_text().splitlines()]

    return calls


class StubVerifier:
    """Candidate containing ``good`` verifies; anything else fails like r.c."""

    def __init__(self, good: str = "GOOD", failure_text: str | None = None):
        self.good = good
        self.failure_text = failure_text or read_fixture("r_c_output.txt")
        self.calls: list[tuple[Path, str]] = []

    def __call__(self, path, cfg):
        code = Path(path).read_text()
        self.calls.append((Path(path), code))
        if self.good in code:
            return Successful(raw_text="VERIFICATION SUCCESSFUL\n")
        return parse_verifier_output(self.failure_text)


@pytest.fixture
def stub_verifier():
    return StubVerifier()


def fenced(code: str, tag: str = "c") -> str:
    return f"Certainly! Here is the fixed code:\n```{tag}\n{code}\n```\n"


# --- acceptance summary: one line per criterion ---------------------------

_criteria: dict[int, dict] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or (rep.when != "call" and not rep.skipped and not rep.failed):
        return
    n, title = mark.args
    entry = _criteria.setdefault(n, {"title": title, "results": []})
    entry["results"].append("skip" if rep.skipped else "fail" if rep.failed else "pass")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        res = _criteria[n]["results"]
        if "fail" in res:
            verdict = "FAIL"
        elif all(r == "skip" for r in res):
            verdict = "SKIP"
        else:
            verdict = "PASS"
        terminalreporter.write_line(
            f"criterion {n} {verdict}: {_criteria[n]['title']} "
            f"({res.count('pass')} passed, {res.count('fail')} failed, {res.count('skip')} skipped)"
        )


# make helpers importable as `from conftest import ...`
sys.path.insert(0, str(Path(__file__).parent))
