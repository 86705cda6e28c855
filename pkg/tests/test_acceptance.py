"""Acceptance suite. Each test carries a ``criterion`` marker; the terminal
summary prints one PASS/FAIL/SKIP line per criterion."""

import difflib
import io
import random
import shutil
import time

import pytest

from conftest import FAKE_ESBMC, SAMPLES, StubVerifier, fenced, read_fixture
from cexrepair.config import load_config
from cexrepair.llm import (
    ChatThread,
    RecordingBackend,
    ReplayBackend,
    ReplayCache,
    ScriptedBackend,
)
from cexrepair.repair import extract_code, fix_code
from cexrepair.session import EXIT_OK, chat_repl, cmd_fix
from cexrepair.transcript import SessionTranscript
from cexrepair.triage import TriageCategory, classify, render_report, run_corpus
from cexrepair.verifier import (
    Counterexample,
    Failed,
    Successful,
    Timeout,
    ToolError,
    Unknown,
    VerifierConfig,
    ViolatedProperty,
    parse_verifier_output,
    run_verifier,
)

ESBMC = shutil.which("esbmc")


def criterion(n, title):
    return pytest.mark.criterion(n, title)


# --- 1 ----------------------------------------------------------------------

C1 = criterion(1, "parser fidelity on the three verbatim outputs, runtime < 1s")


@C1
def test_c1_scanf_block():
    raw = read_fixture("r_c_output.txt")
    t0 = time.perf_counter()
    out = parse_verifier_output(raw)
    assert time.perf_counter() - t0 < 1.0
    assert isinstance(out, Failed)
    p = out.violated_property
    assert (p.file, p.line, p.function, p.kind) == ("r.c", 8, "main", "buffer overflow on scanf")
    assert out.raw_text.encode() == raw.encode()


@C1
def test_c1_mul_overflow_block():
    raw = read_fixture("gpt661_output.txt")
    t0 = time.perf_counter()
    out = parse_verifier_output(raw)
    assert time.perf_counter() - t0 < 1.0
    assert isinstance(out, Failed)
    p = out.violated_property
    assert (p.file, p.line, p.function, p.kind) == ("gpt661.c", 5, "MD5", "arithmetic overflow on mul")
    assert '!overflow("*", a << 5 ^ b << b, a - b)' in p.condition
    assert out.raw_text.encode() == raw.encode()


@C1
def test_c1_successful():
    assert isinstance(parse_verifier_output("VERIFICATION SUCCESSFUL\n"), Successful)


# --- 2 ----------------------------------------------------------------------

C2 = criterion(2, "extract_code agrees with first/last-index oracle, runtime < 5s")


def index_oracle(solution: str) -> str:
    """First index from the front, last index found by searching the reversed string."""
    try:
        s = solution.index("```") + 3
        rs = solution[::-1].index("```")
    except ValueError:
        return solution
    e = len(solution) - 3 - rs
    if e < s:
        return solution
    code = solution[s:e]
    head, sep, tail = code.partition("\n")
    if sep and head.strip() in {"c", "cpp", "markdown", "python"}:
        return tail
    return code


@C2
def test_c2_random_strings():
    rng = random.Random(20230401)
    pieces = ["`", "``", "```", "````", "c", "cpp", "python", "\n", " ", "x", "int main(){}", "é"]
    t0 = time.perf_counter()
    for _ in range(10_000):
        s = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 20)))
        assert extract_code(s) == index_oracle(s), repr(s)
    assert time.perf_counter() - t0 < 5.0


@C2
def test_c2_chat_response_example():
    response = read_fixture("chat_response.txt")
    expected = '\n#include <stdio.h>\n\nint main() {\n    printf("Hello, World!\\n");\n    return 0;\n}\n'
    assert extract_code(response) == index_oracle(response) == expected


# --- 3 ----------------------------------------------------------------------

C3 = criterion(3, "fix loop shape for k in {1, 3, 10} and exhaustion at 10, runtime < 2s")


def _failed():
    return parse_verifier_output(read_fixture("r_c_output.txt"))


@C3
@pytest.mark.parametrize("k", [1, 3, 10])
def test_c3_fixed_on_attempt_k(k):
    t0 = time.perf_counter()
    backend = ScriptedBackend([fenced(f"bad {i}") for i in range(1, k)] + [fenced("GOOD")])
    stub = StubVerifier()
    res = fix_code("src", _failed(), VerifierConfig(),
                   lambda: ChatThread(backend, "gpt-3.5-turbo", 0.0), 10, verify=stub)
    assert res.status == "fixed"
    assert len(res.attempts) == k
    assert len(backend.calls) == k
    assert len(stub.calls) == k
    feedback = [m for m in res.thread.messages[2:] if m.role == "user"]
    assert len(feedback) == k - 1
    assert time.perf_counter() - t0 < 2.0


@C3
def test_c3_exhausted_at_ten():
    t0 = time.perf_counter()
    backend = ScriptedBackend(lambda msgs: fenced("bad"))
    stub = StubVerifier()
    res = fix_code("src", _failed(), VerifierConfig(),
                   lambda: ChatThread(backend, "gpt-3.5-turbo", 0.0), verify=stub)
    assert res.status == "exhausted"
    assert len(res.attempts) == len(backend.calls) == len(stub.calls) == 10
    assert time.perf_counter() - t0 < 2.0


# --- 4 ----------------------------------------------------------------------

C4 = criterion(4, "triage partition over 1000 synthetic outcomes plus fixtures, runtime < 2s")

_KINDS = ["buffer overflow on scanf", "arithmetic overflow on mul", "dereference failure: NULL pointer",
          "array bounds violated", "BUFFER OVERFLOW ON SCANF", "division by zero"]


def _random_outcome(rng):
    tag = rng.randrange(5)
    if tag == 0:
        return Successful()
    if tag == 1:
        return Unknown("no verdict")
    if tag == 2:
        return Timeout(rng.uniform(10, 20))
    if tag == 3:
        return ToolError("crash", f"exit code {rng.randint(1, 9)}")
    prop = ViolatedProperty(f"f{rng.randint(0, 999)}.c", rng.randint(1, 500), "main", rng.choice(_KINDS))
    return Failed(Counterexample(prop, (), "Violated property:\n"))


@C4
def test_c4_partition():
    rng = random.Random(7)
    t0 = time.perf_counter()
    outcomes = [_random_outcome(rng) for _ in range(1000)]
    buckets = {c: [] for c in TriageCategory}
    for i, o in enumerate(outcomes):
        buckets[classify(o)].append(i)
    assert sum(len(v) for v in buckets.values()) == 1000
    assert len(set().union(*buckets.values())) == 1000
    assert time.perf_counter() - t0 < 2.0


# gpt850.c / main / line 35 / NULL pointer, written in the checker's format
NULL_POINTER_OUTPUT = """Violated property:
  file gpt850.c line 35 function main
  dereference failure: NULL pointer

VERIFICATION FAILED
"""


@C4
@pytest.mark.parametrize("outcome,expected", [
    (parse_verifier_output(read_fixture("r_c_output.txt")), TriageCategory.B),
    (parse_verifier_output(NULL_POINTER_OUTPUT), TriageCategory.O),
    (Successful(), TriageCategory.S),
    (Timeout(10.0), TriageCategory.U),
], ids=["scanf", "null-pointer", "successful", "timeout"])
def test_c4_fixtures(outcome, expected):
    assert classify(outcome) is expected


# --- 5 ----------------------------------------------------------------------

C5 = criterion(5, "triage and replayed fix runs are deterministic")


@pytest.fixture
def corpus(tmp_path):
    d = tmp_path / "corpus"
    d.mkdir()
    for name in ("scanf_overflow.c", "md5_overflow.c", "arith_overflow.c", "scanf_overflow_fixed.c",
                 "arith_overflow_fixed.c"):
        shutil.copy(SAMPLES / name, d / name)
    (d / "unknown.c").write_text("int nondet_unknown(void);\n")
    return d


@C5
def test_c5_triage_parallelism(corpus):
    cfg = VerifierConfig(binary_path=str(FAKE_ESBMC), timeout=5.0)
    one = render_report(run_corpus(corpus, cfg, 1), "json", timings=False)
    eight = render_report(run_corpus(corpus, cfg, 8), "json", timings=False)
    assert one.encode() == eight.encode()


@C5
def test_c5_replayed_fix_transcripts(tmp_path):
    cache_path = tmp_path / "replay.jsonl"
    scripted = ScriptedBackend([fenced('scanf("%s", word);'), fenced((SAMPLES / "scanf_overflow_fixed.c").read_text())])

    def run(backend, name):
        d = tmp_path / name
        d.mkdir()
        f = d / "r.c"
        shutil.copy(SAMPLES / "scanf_overflow.c", f)
        cfg = load_config([], {}, {"verifier.binary": str(FAKE_ESBMC), "paths.sessions": str(d / "s")})
        tr = SessionTranscript()
        assert cmd_fix(f, cfg, backend, out=io.StringIO(), transcript=tr) == EXIT_OK
        return tr.normalized(), f.with_suffix(".fixed.c").read_bytes()

    recorded = run(RecordingBackend(scripted, ReplayCache(cache_path)), "record")
    first = run(ReplayBackend(ReplayCache(cache_path)), "replay1")
    second = run(ReplayBackend(ReplayCache(cache_path)), "replay2")
    assert first == second == recorded
    assert len(first[0]) > 5


# --- 6 ----------------------------------------------------------------------

C6 = criterion(6, "live checker integration (needs esbmc on PATH), runtime < 60s")
live = pytest.mark.skipif(ESBMC is None, reason="no ESBMC-compatible binary on PATH")


@C6
@live
@pytest.mark.live
def test_c6_live_samples(tmp_path):
    t0 = time.perf_counter()
    shutil.copy(SAMPLES / "scanf_overflow.c", tmp_path / "scanf_overflow.c")
    rep = run_corpus(tmp_path, VerifierConfig.for_profile("triage", binary_path=ESBMC))
    assert rep.rows[0].category is TriageCategory.B

    ov = VerifierConfig.for_profile("overflow-kinduction", binary_path=ESBMC)
    bad = run_verifier(SAMPLES / "arith_overflow.c", ov)
    assert isinstance(bad, Failed)
    assert "arithmetic overflow on mul" in bad.violated_property.kind
    good = run_verifier(SAMPLES / "arith_overflow_fixed.c", ov)
    assert isinstance(good, Successful)
    assert "VERIFICATION SUCCESSFUL" in good.raw_text
    assert time.perf_counter() - t0 < 60.0


@C6
@live
@pytest.mark.live
def test_c6_live_timeout():
    cfg = VerifierConfig.for_profile("triage", binary_path=ESBMC, unwind=100001, timeout=10.0)
    t0 = time.monotonic()
    out = run_verifier(SAMPLES / "slow_loop.c", cfg)
    wall = time.monotonic() - t0
    assert wall <= 10.0 + 2.0
    if isinstance(out, Timeout):
        assert out.elapsed >= 10.0


# --- 7 ----------------------------------------------------------------------

C7 = criterion(7, "scripted scanf %s -> %9s session through chat, /fix-code and re-verify")


@C7
def test_c7_scripted_scanf_session(tmp_path):
    src = tmp_path / "r.c"
    shutil.copy(SAMPLES / "scanf_overflow.c", src)
    original = src.read_text()
    proposed = original.replace('scanf("%s", word);', 'scanf("%9s", word);')
    backend = ScriptedBackend([
        "The scanf call reads an unbounded string into a 10-byte buffer.",
        "Certainly, here is the corrected code:\n```c\n" + proposed + "```\n",
    ])
    cfg = load_config([], {}, {"verifier.binary": str(FAKE_ESBMC),
                               "paths.sessions": str(tmp_path / "sessions")})
    out = io.StringIO()
    tr = SessionTranscript()
    code = chat_repl(src, cfg, backend, stdin=io.StringIO("/fix-code\n/exit\n"), out=out, transcript=tr)
    text = out.getvalue()
    assert code == EXIT_OK
    assert "buffer overflow on scanf" in text
    assert "Solution (verified):" in text

    solution = extract_code(text[text.index("Solution (verified):"):])
    changed = [l for l in difflib.unified_diff(original.splitlines(), solution.splitlines(), lineterm="")
               if l[:1] in "+-" and not l.startswith(("+++", "---"))]
    assert changed == ['-    scanf("%s", word);', '+    scanf("%9s", word);']

    fixed = tmp_path / "r_fixed.c"
    fixed.write_text(solution)
    assert isinstance(run_verifier(fixed, cfg.verifier), Successful)
    (verdict,) = [e for e in tr.of_kind("attempt")]
    assert verdict.payload["outcome"]["tag"] == "successful"
