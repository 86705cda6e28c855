"""User Chat Mode and the non-interactive fix command."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Callable, TextIO

from .config import AppConfig
from .llm import (
    ChatThread,
    CompletionBackend,
    GatewayError,
    HttpBackend,
    RecordingBackend,
    ReplayBackend,
    ReplayCache,
    ScriptedBackend,
)
from .prompts import load_catalog, render
from .repair import RepairResult, fix_code
from .transcript import SessionTranscript
from .verifier import (
    SPAWN_FAILED,
    Failed,
    Successful,
    ToolError,
    VerificationOutcome,
    VerifierConfig,
    describe,
    outcome_to_dict,
    run_verifier,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_EXHAUSTED = 2
EXIT_ABORTED = 3
EXIT_CONFIG = 64
EXIT_UNAVAILABLE = 69

Verify = Callable[[Path, VerifierConfig], VerificationOutcome]


def make_backend(config: AppConfig) -> CompletionBackend:
    cache = ReplayCache(config.cache_path) if config.cache_path else None
    if config.backend == "replay":
        assert cache is not None
        return ReplayBackend(cache)
    if config.backend.startswith("scripted:"):
        backend: CompletionBackend = ScriptedBackend.from_file(config.backend[len("scripted:"):])
    else:
        if not config.api_key:
            raise GatewayError("live backend needs an API key")
        backend = HttpBackend(config.endpoint, config.api_key, retries=config.retries)
    return RecordingBackend(backend, cache) if cache is not None else backend


def _log_messages(transcript: SessionTranscript, thread: ChatThread, start: int, name: str) -> None:
    for m in thread.messages[start:]:
        transcript.log("message", {"thread": name, "role": m.role, "content": m.content})


def _log_repair(transcript: SessionTranscript, result: RepairResult) -> None:
    for a in result.attempts:
        transcript.log("attempt", {
            "index": a.index,
            "file": a.path,
            "code": a.extracted_code,
            "outcome": outcome_to_dict(a.outcome),
            "duration_s": a.duration,
        })
    if result.thread is not None:
        _log_messages(transcript, result.thread, 0, "fix")
    transcript.log("result", {
        "status": result.status,
        "attempts": len(result.attempts),
        "final_code": result.final_code,
        "error": result.error,
    })


def _run_fix(source: str, outcome: Failed, config: AppConfig, backend: CompletionBackend,
             transcript: SessionTranscript, verify: Verify, keep_artifacts: bool) -> RepairResult:
    catalog = load_catalog(config.prompt_dir)
    result = fix_code(
        source,
        outcome,
        config.verifier,
        lambda: ChatThread(backend, config.model_id, config.temperatures["repair"],
                           token_budget=config.token_budget),
        config.max_attempts,
        verify=verify,
        feedback_mode=config.feedback_mode,
        catalog=catalog,
        session_dir=config.session_dir / f"{transcript.session_id}-fix",
        keep_artifacts=keep_artifacts,
    )
    _log_repair(transcript, result)
    return result


def print_solution(code: str, out: TextIO) -> None:
    out.write("Solution (verified):\n```c\n" + code.rstrip("\n") + "\n```\n")


def chat_repl(
    file: str | Path,
    config: AppConfig,
    backend: CompletionBackend,
    *,
    stdin: TextIO | None = None,
    out: TextIO | None = None,
    verify: Verify = run_verifier,
    transcript: SessionTranscript | None = None,
    keep_artifacts: bool = False,
) -> int:
    """Interactive loop: ``/exit`` quits, ``/fix-code`` repairs, anything else goes to the model."""
    stdin = stdin or sys.stdin
    out = out or sys.stdout
    file = Path(file)
    source = file.read_text(encoding="utf-8")
    transcript = transcript or SessionTranscript(config.session_dir)
    catalog = load_catalog(config.prompt_dir)

    outcome = verify(file, config.verifier)
    transcript.log("verifier_run", {"file": file.name, "outcome": outcome_to_dict(outcome)})
    out.write(f"ESBMC: {describe(outcome)}\n")
    if isinstance(outcome, ToolError):
        out.write("warning: the verifier failed; continuing with its error text as output\n")
        verifier_output = outcome.raw_text or outcome.detail
    else:
        verifier_output = outcome.raw_text or describe(outcome)

    thread = ChatThread(backend, config.model_id, config.temperatures["chat"],
                        token_budget=config.token_budget)
    thread.add("system", render(catalog["chat-system"], {}))
    thread.add("system", render(catalog["chat-context"], {
        "source_code": source, "verifier_output": verifier_output,
    }))

    def ask(prompt: str) -> None:
        n = len(thread)
        try:
            reply = thread.send(prompt)
        except GatewayError as e:
            transcript.log("error", {"detail": str(e)})
            out.write(f"error: {e}\n")
            return
        _log_messages(transcript, thread, n, "chat")
        out.write(reply.content.rstrip("\n") + "\n")

    _log_messages(transcript, thread, 0, "chat")
    ask(render(catalog["chat-initial"], {}))

    while True:
        out.write(">>> ")
        out.flush()
        line = stdin.readline()
        if not line:
            break
        prompt = line.rstrip("\r\n")
        if prompt == "/exit":
            break
        if prompt == "/fix-code":
            if not isinstance(outcome, Failed):
                out.write(f"Nothing to fix: {describe(outcome)}\n")
                continue
            result = _run_fix(source, outcome, config, backend, transcript, verify, keep_artifacts)
            if result.fixed:
                print_solution(result.final_code, out)
            else:
                out.write(f"Failed to generate solution ({result.status}, "
                          f"{len(result.attempts)} attempts)\n")
            continue
        if prompt.strip():
            ask(prompt)
    return EXIT_OK


def cmd_fix(
    file: str | Path,
    config: AppConfig,
    backend: CompletionBackend,
    *,
    in_place: bool = False,
    keep_artifacts: bool = False,
    out: TextIO | None = None,
    verify: Verify = run_verifier,
    transcript: SessionTranscript | None = None,
) -> int:
    out = out or sys.stdout
    file = Path(file)
    source = file.read_text(encoding="utf-8")
    transcript = transcript or SessionTranscript(config.session_dir)

    outcome = verify(file, config.verifier)
    transcript.log("verifier_run", {"file": file.name, "outcome": outcome_to_dict(outcome)})
    out.write(f"ESBMC: {describe(outcome)}\n")
    if isinstance(outcome, ToolError) and outcome.exit_info == SPAWN_FAILED:
        return EXIT_UNAVAILABLE
    if isinstance(outcome, Successful):
        out.write("nothing to fix\n")
        return EXIT_OK
    if not isinstance(outcome, Failed):
        out.write("cannot repair: verification produced no counterexample\n")
        return EXIT_FAILURE

    result = _run_fix(source, outcome, config, backend, transcript, verify, keep_artifacts)
    if result.fixed:
        target = file if in_place else file.with_suffix(".fixed.c")
        target.write_text(result.final_code, encoding="utf-8")
        out.write(f"fixed after {len(result.attempts)} attempt(s): wrote {target}\n")
        return EXIT_OK
    for a in result.attempts:
        out.write(f"  attempt {a.index}: {describe(a.outcome)}\n")
    if result.status == "aborted":
        out.write(f"aborted: {result.error}\n")
        return EXIT_ABORTED
    out.write(f"no verified fix after {len(result.attempts)} attempts; "
              f"candidates kept in {result.session_dir}\n")
    return EXIT_EXHAUSTED
