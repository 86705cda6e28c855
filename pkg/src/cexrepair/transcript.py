"""JSONL session transcripts, one file per session."""

from __future__ import annotations

import json
import secrets
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Callable

EVENT_KINDS = ("message", "verifier_run", "attempt", "result", "error")
# keys whose values depend on the clock rather than the inputs
TIMING_KEYS = frozenset({"time", "duration_s", "elapsed"})


@dataclass(frozen=True)
class Event:
    seq: int
    kind: str
    payload: dict
    time: float


def new_session_id(clock: Callable[[], float] = time.time) -> str:
    stamp = time.strftime("%Y%m%d-%H%M%S", time.gmtime(clock()))
    return f"{stamp}-{secrets.token_hex(3)}"


class SessionTranscript:
    """Append-only event log. With a directory, each event is flushed to
    ``<directory>/<session_id>.jsonl`` as it happens."""

    def __init__(self, directory: str | Path | None = None, session_id: str | None = None,
                 clock: Callable[[], float] = time.time):
        self.clock = clock
        self.session_id = session_id or new_session_id(clock)
        self.events: list[Event] = []
        self.path: Path | None = None
        if directory is not None:
            directory = Path(directory)
            directory.mkdir(parents=True, exist_ok=True)
            self.path = directory / f"{self.session_id}.jsonl"

    def log(self, kind: str, payload: dict[str, Any]) -> Event:
        if kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {kind!r}")
        ev = Event(len(self.events), kind, payload, self.clock())
        self.events.append(ev)
        if self.path is not None:
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(asdict(ev), ensure_ascii=False, sort_keys=True) + "\n")
        return ev

    def of_kind(self, kind: str) -> list[Event]:
        return [e for e in self.events if e.kind == kind]

    @classmethod
    def load(cls, path: str | Path) -> "SessionTranscript":
        path = Path(path)
        t = cls(session_id=path.stem)
        with open(path, encoding="utf-8") as f:
            for line in f:
                if line.strip():
                    d = json.loads(line)
                    t.events.append(Event(d["seq"], d["kind"], d["payload"], d["time"]))
        t.path = path
        return t

    def normalized(self) -> list[dict]:
        """Events with clock-dependent fields removed, for comparisons."""
        return [_strip({"seq": e.seq, "kind": e.kind, "payload": e.payload}) for e in self.events]


def _strip(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {k: _strip(v) for k, v in obj.items() if k not in TIMING_KEYS}
    if isinstance(obj, list):
        return [_strip(v) for v in obj]
    return obj
