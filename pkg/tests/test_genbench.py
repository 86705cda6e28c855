import pytest
from hypothesis import given, strategies as st

from conftest import SAMPLES, fenced
from cexrepair.genbench import GenReport, GenRow, GenSpec, generate_samples
from cexrepair.llm import ScriptedBackend, TransportError

GOOD = (SAMPLES / "md5_overflow.c").read_text()
NO_STDLIB = ('#include <stdio.h>\n'
             'int main(void) { int *p = malloc(4); *p = 1; printf("%d\\n", *p); free(p); return 0; }\n')
WITH_STDLIB = "#include <stdlib.h>\n" + NO_STDLIB


def test_three_compiling_samples(tmp_path):
    backend = ScriptedBackend([fenced(GOOD)] * 3)
    rep = generate_samples(GenSpec(3, tmp_path), backend)
    assert (rep.generated, rep.compiled_first_try, rep.failed) == (3, 3, 0)
    assert sorted(p.name for p in tmp_path.iterdir()) == ["sample1.c", "sample2.c", "sample3.c"]
    assert (tmp_path / "sample2.c").read_text() == GOOD + "\n"


def test_each_sample_uses_a_fresh_single_turn_thread(tmp_path):
    backend = ScriptedBackend([fenced(GOOD)] * 2)
    generate_samples(GenSpec(2, tmp_path, temperature=1.0), backend)
    assert [len(c) for c in backend.calls] == [1, 1]
    assert backend.calls[0] == backend.calls[1]
    assert "Use at least two functions" in backend.calls[0][0].content


def test_missing_header_repaired(tmp_path):
    backend = ScriptedBackend([fenced(NO_STDLIB), fenced(WITH_STDLIB)])
    rep = generate_samples(GenSpec(1, tmp_path, repair_compile=True), backend)
    assert rep.needed_repair == 1 and rep.compiled_after_repair == 1 and rep.failed == 0
    assert rep.rows[0].status == "repaired" and rep.rows[0].repair_attempts == 1
    assert "#include <stdlib.h>" in (tmp_path / "sample1.c").read_text()
    # the diagnostics went back to the model
    assert "malloc" in backend.calls[1][-1].content


def test_broken_without_repair(tmp_path):
    rep = generate_samples(GenSpec(1, tmp_path), ScriptedBackend([fenced(NO_STDLIB)]))
    assert rep.rows[0].status == "broken"
    assert "implicit declaration" in rep.rows[0].diagnostics
    assert rep.failed == 1 and rep.generated == 1


def test_gateway_error_row(tmp_path):
    def fail(msgs):
        raise TransportError("down", status=503, attempts=4, retryable=True)

    rep = generate_samples(GenSpec(2, tmp_path), ScriptedBackend(fail))
    assert [r.status for r in rep.rows] == ["error", "error"]
    assert rep.generated == 0 and rep.failed == 2


def test_parallel_generation_keeps_order(tmp_path):
    backend = ScriptedBackend(lambda msgs: fenced(GOOD))
    rep = generate_samples(GenSpec(6, tmp_path, jobs=3), backend)
    assert [r.index for r in rep.rows] == [1, 2, 3, 4, 5, 6]
    assert rep.compiled_first_try == 6


@pytest.mark.parametrize("kwargs", [
    {"count": 0}, {"count": -1}, {"count": 1, "min_lines": 50, "max_lines": 10},
    {"count": 1, "jobs": 0},
])
def test_invalid_spec(tmp_path, kwargs):
    with pytest.raises(ValueError):
        GenSpec(output_dir=tmp_path, **kwargs)


def test_naming(tmp_path):
    spec = GenSpec(12, tmp_path, naming_prefix="gpt")
    assert spec.filename(1) == "gpt1.c" and spec.filename(12) == "gpt12.c"


_status = st.sampled_from(["compiled", "repaired", "broken", "error"])


@given(st.lists(_status, max_size=60))
def test_report_arithmetic(statuses):
    rows = [GenRow(i, None if s == "error" else f"s{i}.c", s) for i, s in enumerate(statuses, 1)]
    rep = GenReport(rows)
    assert rep.generated + statuses.count("error") == len(statuses)
    assert rep.compiled_first_try + rep.needed_repair + statuses.count("error") == len(statuses)
    assert rep.compiled_after_repair <= rep.needed_repair
    assert rep.compiled_first_try + rep.compiled_after_repair + rep.failed == len(statuses)
