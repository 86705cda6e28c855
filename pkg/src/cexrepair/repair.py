"""Solution generation: ask the model for code, extract it, check it, repeat."""

from __future__ import annotations

import logging
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Sequence, Union

from .llm import ChatThread, GatewayError
from .prompts import PromptTemplate, builtin_catalog, render
from .verifier import (
    Failed,
    Successful,
    VerificationOutcome,
    VerifierConfig,
    outcome_feedback,
    run_verifier,
)

log = logging.getLogger(__name__)

FENCE = "```"
LANGUAGE_TAGS = frozenset({"c", "cpp", "markdown", "python"})
DEFAULT_MAX_ATTEMPTS = 10
DEFAULT_COMPILER_CMD: tuple[str, ...] = ("gcc", "-Werror=implicit-function-declaration")
LINK_FLAGS: tuple[str, ...] = ("-lm",)

ThreadFactory = Callable[[], ChatThread]
Verify = Callable[[Path, VerifierConfig], VerificationOutcome]


def extract_code(response: str) -> str:
    """Slice between the first and the last triple backtick.

    With fewer than two separate fences the response is returned unchanged.
    A bare language tag on the first line of the slice is dropped.
    """
    start = response.find(FENCE)
    end = response.rfind(FENCE)
    if start < 0 or end < start + len(FENCE):
        return response
    code = response[start + len(FENCE) : end]
    first, nl, rest = code.partition("\n")
    if nl and first.strip() in LANGUAGE_TAGS:
        return rest
    return code


@dataclass(frozen=True)
class CompileResult:
    ok: bool
    diagnostics: str
    exit_info: str


class CompilerNotFoundError(FileNotFoundError):
    pass


@dataclass
class RepairAttempt:
    index: int
    raw_response: str
    extracted_code: str
    outcome: Union[VerificationOutcome, CompileResult]
    duration: float
    path: str | None = None

    @property
    def succeeded(self) -> bool:
        if isinstance(self.outcome, CompileResult):
            return self.outcome.ok
        return isinstance(self.outcome, Successful)


@dataclass
class RepairResult:
    status: Literal["fixed", "exhausted", "aborted"]
    attempts: list[RepairAttempt] = field(default_factory=list)
    final_code: str | None = None
    error: str | None = None
    session_dir: str | None = None
    thread: ChatThread | None = None

    @property
    def fixed(self) -> bool:
        return self.status == "fixed"


def compile_gate(source: str, compiler_cmd: Sequence[str] = DEFAULT_COMPILER_CMD) -> CompileResult:
    if not compiler_cmd or shutil.which(compiler_cmd[0]) is None:
        raise CompilerNotFoundError(f"compiler not found: {compiler_cmd[0] if compiler_cmd else '<empty>'}")
    with tempfile.TemporaryDirectory(prefix="cexrepair-cc-") as tmp:
        src = Path(tmp) / "candidate.c"
        src.write_text(source, encoding="utf-8")
        cmd = [*compiler_cmd, str(src), "-o", str(Path(tmp) / "candidate.out"), *LINK_FLAGS]
        proc = subprocess.run(cmd, capture_output=True, text=True, errors="replace")
    return CompileResult(proc.returncode == 0, proc.stderr, f"exit code {proc.returncode}")


def _run_loop(
    thread: ChatThread,
    max_attempts: int,
    check: Callable[[int, str], tuple[Union[VerificationOutcome, CompileResult], str | None]],
    feedback: Callable[[Union[VerificationOutcome, CompileResult]], str],
) -> RepairResult:
    attempts: list[RepairAttempt] = []
    for k in range(1, max_attempts + 1):
        t0 = time.monotonic()
        try:
            reply = thread.generate()
        except GatewayError as e:
            log.error("completion failed on attempt %d: %s", k, e)
            return RepairResult("aborted", attempts, error=str(e), thread=thread)
        code = extract_code(reply.content)
        outcome, path = check(k, code)
        attempt = RepairAttempt(k, reply.content, code, outcome, time.monotonic() - t0, path)
        attempts.append(attempt)
        if attempt.succeeded:
            return RepairResult("fixed", attempts, final_code=code, thread=thread)
        log.info("attempt %d/%d failed, retrying", k, max_attempts)
        thread.add("user", feedback(outcome) or "The code is still incorrect.")
    return RepairResult("exhausted", attempts, thread=thread)


def fix_code(
    source: str,
    initial_outcome: VerificationOutcome,
    verifier_cfg: VerifierConfig,
    thread_factory: ThreadFactory,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
    *,
    verify: Verify = run_verifier,
    feedback_mode: str = "full_trace",
    catalog: dict[str, PromptTemplate] | None = None,
    session_dir: str | Path | None = None,
    keep_artifacts: bool = False,
) -> RepairResult:
    """Repair ``source`` until the verifier accepts a candidate.

    Candidate ``k`` is written to ``<session_dir>/attempt-<k>.c`` before it
    is verified. The session directory is removed after a successful fix
    unless ``keep_artifacts`` is set.
    """
    if not isinstance(initial_outcome, Failed):
        raise ValueError("fix_code needs a Failed initial outcome")
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    catalog = catalog or builtin_catalog()

    thread = thread_factory()
    thread.add("system", render(catalog["fix-system"], {}))
    thread.add("user", render(catalog["fix-code"], {
        "content": source,
        "counterexample_from_ESBMC": outcome_feedback(initial_outcome, feedback_mode),
    }))

    workdir = Path(session_dir) if session_dir else Path(tempfile.mkdtemp(prefix="cexrepair-fix-"))
    workdir.mkdir(parents=True, exist_ok=True)

    def check(k: int, code: str):
        path = workdir / f"attempt-{k}.c"
        path.write_text(code, encoding="utf-8")
        return verify(path, verifier_cfg), path.name

    result = _run_loop(thread, max_attempts, check, lambda o: outcome_feedback(o, feedback_mode))
    if result.fixed and not keep_artifacts:
        shutil.rmtree(workdir, ignore_errors=True)
    else:
        result.session_dir = str(workdir)
    return result


def repair_compilation(
    source: str,
    max_attempts: int,
    thread_factory: ThreadFactory,
    *,
    compiler_cmd: Sequence[str] = DEFAULT_COMPILER_CMD,
    catalog: dict[str, PromptTemplate] | None = None,
) -> RepairResult:
    """Feed compiler diagnostics back to the model until the code compiles."""
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    first = compile_gate(source, compiler_cmd)
    if first.ok:
        return RepairResult("fixed", [], final_code=source)
    catalog = catalog or builtin_catalog()

    thread = thread_factory()
    thread.add("system", render(catalog["fix-system"], {}))
    thread.add("user", render(catalog["fix-compile"], {
        "content": source, "diagnostics": first.diagnostics or first.exit_info,
    }))
    return _run_loop(
        thread,
        max_attempts,
        lambda k, code: (compile_gate(code, compiler_cmd), None),
        lambda r: r.diagnostics or r.exit_info,
    )
