"""Drive an ESBMC-style bounded model checker and parse what it prints.

The checker is an external binary. Everything here treats its output as
text: verdict markers and the ``Violated property:`` block are the only
structure relied on, so formatting drift in the trace section is harmless.
"""

from __future__ import annotations

import os
import re
import signal
import subprocess
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Union

MARK_SUCCESS = "VERIFICATION SUCCESSFUL"
MARK_FAILED = "VERIFICATION FAILED"
MARK_UNKNOWN = "VERIFICATION UNKNOWN"
MARK_PROPERTY = "Violated property:"

# profile id -> (analysis flags, default unwind)
PROFILES: dict[str, tuple[tuple[str, ...], int]] = {
    "triage": ((), 50),
    "overflow-kinduction": (("--overflow", "--k-induction"), 1),
}

DEFAULT_TIMEOUT = 10.0
REASON_CHARS = 200

_HEADER_RE = re.compile(
    r"^file\s+(?P<file>\S+)\s+line\s+(?P<line>\d+)(?:\s+column\s+\d+)?\s+function\s+(?P<function>\S+)"
)


class ConfigError(ValueError):
    """Invalid verifier configuration."""


@dataclass(frozen=True)
class VerifierConfig:
    binary_path: str = "esbmc"
    flag_profile: str = "triage"
    extra_flags: tuple[str, ...] = ()
    unwind: int = 50
    timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.flag_profile not in PROFILES:
            raise ConfigError(
                f"unknown flag profile {self.flag_profile!r}; "
                f"known: {', '.join(sorted(PROFILES))}"
            )
        if isinstance(self.unwind, bool) or not isinstance(self.unwind, int) or self.unwind < 1:
            raise ConfigError(f"unwind must be a positive integer, got {self.unwind!r}")
        if not self.timeout > 0:
            raise ConfigError(f"timeout must be > 0, got {self.timeout!r}")
        object.__setattr__(self, "extra_flags", tuple(self.extra_flags))

    @classmethod
    def for_profile(cls, profile: str, **overrides) -> "VerifierConfig":
        """Config with the profile's default unwind unless overridden."""
        if profile not in PROFILES:
            raise ConfigError(f"unknown flag profile {profile!r}")
        overrides.setdefault("unwind", PROFILES[profile][1])
        return cls(flag_profile=profile, **overrides)

    def command(self, source_path: str | os.PathLike) -> list[str]:
        flags, _ = PROFILES[self.flag_profile]
        return [
            self.binary_path,
            *flags,
            *self.extra_flags,
            "--unwind",
            str(self.unwind),
            str(source_path),
        ]


@dataclass(frozen=True)
class ViolatedProperty:
    file: str
    line: int
    function: str
    kind: str
    condition: str = ""

    def __post_init__(self):
        if not (self.file and self.function and self.kind):
            raise ValueError("file, function and kind must be non-empty")
        if self.line < 1:
            raise ValueError(f"line must be >= 1, got {self.line}")


@dataclass(frozen=True)
class Counterexample:
    violated_property: ViolatedProperty
    state_lines: tuple[str, ...]
    raw_text: str


@dataclass(frozen=True)
class Successful:
    raw_text: str = ""
    tag: Literal["successful"] = field(default="successful", init=False)


@dataclass(frozen=True)
class Failed:
    counterexample: Counterexample
    tag: Literal["failed"] = field(default="failed", init=False)

    @property
    def raw_text(self) -> str:
        return self.counterexample.raw_text

    @property
    def violated_property(self) -> ViolatedProperty:
        return self.counterexample.violated_property


@dataclass(frozen=True)
class Unknown:
    reason: str
    raw_text: str = ""
    tag: Literal["unknown"] = field(default="unknown", init=False)


@dataclass(frozen=True)
class Timeout:
    elapsed: float
    raw_text: str = ""
    tag: Literal["timeout"] = field(default="timeout", init=False)


@dataclass(frozen=True)
class ToolError:
    detail: str
    exit_info: str
    raw_text: str = ""
    tag: Literal["tool_error"] = field(default="tool_error", init=False)


VerificationOutcome = Union[Successful, Failed, Unknown, Timeout, ToolError]

# exit_info value used when the binary could not be started at all
SPAWN_FAILED = "spawn-failed"


def _parse_property_block(lines: list[str], start: int) -> ViolatedProperty | None:
    """Parse the block after the ``Violated property:`` line at ``start``."""
    i = start + 1
    while i < len(lines) and not lines[i].strip():
        i += 1
    if i >= len(lines):
        return None
    m = _HEADER_RE.match(lines[i].strip())
    if m is None:
        return None
    i += 1
    while i < len(lines) and not lines[i].strip():
        i += 1
    if i >= len(lines):
        return None
    kind = lines[i].strip()
    if kind.startswith("VERIFICATION "):
        return None
    condition = []
    for line in lines[i + 1 :]:
        if not line.strip() or line.strip().startswith("VERIFICATION "):
            break
        condition.append(line.strip())
    try:
        return ViolatedProperty(
            file=m["file"],
            line=int(m["line"]),
            function=m["function"],
            kind=kind,
            condition="\n".join(condition),
        )
    except ValueError:
        return None


def _state_lines(lines: list[str], stop: int) -> tuple[str, ...]:
    start = 0
    for i in range(stop):
        if lines[i].strip() == "Counterexample:":
            start = i + 1
            break
    return tuple(line for line in lines[start:stop] if line.strip())


def parse_verifier_output(raw: str) -> VerificationOutcome:
    """Turn raw checker output into an outcome. Never raises.

    A ``Violated property:`` block wins over the success marker, since truncated
    logs may print the block without the trailing ``VERIFICATION FAILED``.
    A block that cannot be parsed degrades to :class:`Unknown`.
    """
    lines = raw.splitlines()
    prop_at = next(
        (i for i, line in enumerate(lines) if line.strip() == MARK_PROPERTY), None
    )
    failed_marker = any(line.strip() == MARK_FAILED for line in lines)

    if prop_at is not None:
        prop = _parse_property_block(lines, prop_at)
        if prop is not None:
            cex = Counterexample(prop, _state_lines(lines, prop_at), raw)
            return Failed(cex)
        return Unknown(reason="malformed violated-property block", raw_text=raw)
    if failed_marker:
        return Unknown(reason="verification failed without a violated property", raw_text=raw)
    if any(line.strip() == MARK_SUCCESS for line in lines):
        return Successful(raw_text=raw)
    return Unknown(reason=raw[:REASON_CHARS], raw_text=raw)


def has_verdict_marker(raw: str) -> bool:
    return any(m in raw for m in (MARK_SUCCESS, MARK_FAILED, MARK_UNKNOWN, MARK_PROPERTY))


def counterexample_to_prompt_text(
    cex: Counterexample, mode: Literal["property_only", "full_trace"] = "full_trace"
) -> str:
    if mode == "full_trace":
        return cex.raw_text
    if mode != "property_only":
        raise ValueError(f"unknown rendering mode {mode!r}")
    p = cex.violated_property
    out = [
        MARK_PROPERTY,
        f"  file {p.file} line {p.line} function {p.function}",
        f"  {p.kind}",
    ]
    out.extend(f"  {line}" for line in p.condition.splitlines())
    return "\n".join(out)


def outcome_feedback(outcome: VerificationOutcome, mode: str = "full_trace") -> str:
    """Text sent back to the model after a failed attempt."""
    if isinstance(outcome, Failed):
        return counterexample_to_prompt_text(outcome.counterexample, mode)
    if isinstance(outcome, Timeout):
        return f"Verification timed out after {outcome.elapsed:.1f} seconds. Simplify the code."
    if isinstance(outcome, ToolError):
        return f"The verifier could not process the code ({outcome.exit_info}):\n{outcome.raw_text or outcome.detail}"
    if isinstance(outcome, Unknown):
        return outcome.raw_text or outcome.reason
    return outcome.raw_text


def _kill_group(proc: subprocess.Popen) -> None:
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        proc.kill()


def run_verifier(source_path: str | os.PathLike, config: VerifierConfig) -> VerificationOutcome:
    """Run the checker on one file.

    Spawn problems and timeouts come back as outcomes; only an unreadable
    source file raises.
    """
    source_path = Path(source_path)
    with open(source_path, "rb"):
        pass

    # run next to the file so paths in the output don't depend on where it lives
    binary = config.binary_path
    if os.sep in binary:
        binary = os.path.abspath(binary)
    cmd = [binary, *config.command(source_path.name)[1:]]
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            cmd,
            cwd=source_path.parent,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            stdin=subprocess.DEVNULL,
            start_new_session=True,
        )
    except FileNotFoundError:
        return ToolError(f"binary not found: {config.binary_path}", SPAWN_FAILED)
    except OSError as e:
        return ToolError(f"failed to start {config.binary_path}: {e}", SPAWN_FAILED)

    try:
        out, err = proc.communicate(timeout=config.timeout)
    except subprocess.TimeoutExpired:
        _kill_group(proc)
        out, err = proc.communicate()
        elapsed = time.monotonic() - start
        return Timeout(elapsed, raw_text=_decode(out) + _decode(err))

    raw = _decode(out) + _decode(err)
    if proc.returncode != 0 and not has_verdict_marker(raw):
        return ToolError(
            raw.strip()[:REASON_CHARS] or "no output",
            f"exit code {proc.returncode}",
            raw_text=raw,
        )
    return parse_verifier_output(raw)


def _decode(data: bytes | None) -> str:
    return data.decode("utf-8", errors="replace") if data else ""


def outcome_to_dict(outcome: VerificationOutcome) -> dict:
    """JSON-friendly view of an outcome, used in transcripts."""
    d: dict = {"tag": outcome.tag}
    if isinstance(outcome, Failed):
        p = outcome.violated_property
        d.update(file=p.file, line=p.line, function=p.function, kind=p.kind,
                 condition=p.condition)
    elif isinstance(outcome, Unknown):
        d["reason"] = outcome.reason
    elif isinstance(outcome, Timeout):
        d["elapsed"] = outcome.elapsed
    elif isinstance(outcome, ToolError):
        d.update(detail=outcome.detail, exit_info=outcome.exit_info)
    d["raw_text"] = outcome.raw_text
    return d


def describe(outcome: VerificationOutcome) -> str:
    """One-line human summary."""
    if isinstance(outcome, Successful):
        return MARK_SUCCESS
    if isinstance(outcome, Failed):
        p = outcome.violated_property
        return f"{MARK_FAILED}: {p.kind} ({p.file}:{p.line}, function {p.function})"
    if isinstance(outcome, Timeout):
        return f"TIMEOUT after {outcome.elapsed:.1f}s"
    if isinstance(outcome, ToolError):
        return f"VERIFIER ERROR ({outcome.exit_info}): {outcome.detail}"
    return f"{MARK_UNKNOWN}: {outcome.reason[:80]}"
