"""Chat threads and completion backends.

Three interchangeable backends share one ``complete(model_id, temperature,
messages) -> str`` method:

* :class:`HttpBackend` talks to a chat-completions endpoint,
* :class:`ReplayBackend` answers from a JSONL cache keyed by :func:`cache_key`,
* :class:`ScriptedBackend` hands out canned responses in order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import struct
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Literal, Protocol, Sequence

import httpx

log = logging.getLogger(__name__)

Role = Literal["system", "user", "assistant"]
ROLES: tuple[str, ...] = ("system", "user", "assistant")
_ROLE_BYTE = {"system": b"S", "user": b"U", "assistant": b"A"}

BODY_SNIPPET = 500


class GatewayError(RuntimeError):
    """Base class for completion failures."""


class TransportError(GatewayError):
    def __init__(self, message: str, *, status: int | None = None, attempts: int = 1,
                 retryable: bool = True):
        super().__init__(message)
        self.status = status
        self.attempts = attempts
        self.retryable = retryable


class ProtocolError(GatewayError):
    """The endpoint answered, but not in the chat-completions shape."""


class UnscriptedPromptError(GatewayError):
    """A deterministic backend has no response for this request."""


class ContextOverflowError(GatewayError):
    """The message stack exceeds the configured token budget."""


@dataclass(frozen=True)
class Message:
    role: Role
    content: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if not isinstance(self.content, str) or not self.content:
            raise ValueError(f"{self.role} message content must be a non-empty string")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}

    @classmethod
    def from_dict(cls, d: dict) -> "Message":
        return cls(d["role"], d["content"])


def estimate_tokens(text: str) -> int:
    """Rough token count: one token per four UTF-8 bytes."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def cache_key(model_id: str, temperature: float, messages: Sequence[Message]) -> str:
    """SHA-256 hex digest of a canonical encoding of a completion request."""
    h = hashlib.sha256()

    def put(data: bytes) -> None:
        h.update(struct.pack(">Q", len(data)))
        h.update(data)

    put(model_id.encode("utf-8"))
    put(repr(float(temperature)).encode("ascii"))
    h.update(struct.pack(">Q", len(messages)))
    for m in messages:
        h.update(_ROLE_BYTE[m.role])
        put(m.content.encode("utf-8"))
    return h.hexdigest()


class CompletionBackend(Protocol):
    live: bool
    deterministic: bool

    def complete(self, model_id: str, temperature: float, messages: Sequence[Message]) -> str:
        ...


class ReplayCache:
    """Append-only JSONL store of completed requests."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._entries: dict[str, str] = {}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as f:
                for lineno, line in enumerate(f, 1):
                    if not line.strip():
                        continue
                    try:
                        rec = json.loads(line)
                        self._entries[rec["key"]] = rec["response"]
                    except (json.JSONDecodeError, KeyError) as e:
                        raise ValueError(f"{self.path}:{lineno}: bad cache record: {e}") from e

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> str | None:
        return self._entries.get(key)

    def put(self, model_id: str, temperature: float, messages: Sequence[Message],
            response: str) -> str:
        key = cache_key(model_id, temperature, messages)
        rec = {
            "key": key,
            "model": model_id,
            "temperature": temperature,
            "messages": [m.to_dict() for m in messages],
            "response": response,
        }
        line = json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n"
        with self._lock:
            if key in self._entries:
                return key
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(line)
            self._entries[key] = response
        return key


class ScriptedBackend:
    """Returns queued responses in order; optionally a function of the stack."""

    live = False
    deterministic = True

    def __init__(self, responses: Iterable[str] | Callable[[Sequence[Message]], str]):
        self._lock = threading.Lock()
        if callable(responses):
            self._fn = responses
            self._queue: list[str] = []
        else:
            self._fn = None
            self._queue = list(responses)
        self.calls: list[tuple[Message, ...]] = []

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedBackend":
        """Load a JSON list of response strings."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, list) or not all(isinstance(x, str) for x in data):
            raise ValueError(f"{path}: expected a JSON list of strings")
        return cls(data)

    @property
    def remaining(self) -> int:
        return len(self._queue)

    def complete(self, model_id: str, temperature: float, messages: Sequence[Message]) -> str:
        with self._lock:
            self.calls.append(tuple(messages))
            if self._fn is not None:
                return self._fn(messages)
            if not self._queue:
                raise UnscriptedPromptError(
                    f"scripted backend exhausted after {len(self.calls) - 1} responses"
                )
            return self._queue.pop(0)


class ReplayBackend:
    live = False
    deterministic = True

    def __init__(self, cache: ReplayCache):
        self.cache = cache

    def complete(self, model_id: str, temperature: float, messages: Sequence[Message]) -> str:
        key = cache_key(model_id, temperature, messages)
        response = self.cache.get(key)
        if response is None:
            raise UnscriptedPromptError(f"no recorded response for request {key[:12]}")
        return response


class RecordingBackend:
    """Wraps another backend and stores every answer in a replay cache."""

    def __init__(self, inner: CompletionBackend, cache: ReplayCache):
        self.inner = inner
        self.cache = cache
        self.live = inner.live
        self.deterministic = inner.deterministic

    def complete(self, model_id: str, temperature: float, messages: Sequence[Message]) -> str:
        response = self.inner.complete(model_id, temperature, messages)
        self.cache.put(model_id, temperature, messages, response)
        return response


class HttpBackend:
    """Chat-completions client with retry and exponential backoff.

    429 and 5xx responses and network errors are retried ``retries`` times;
    other non-2xx statuses fail immediately.
    """

    live = True
    deterministic = False

    def __init__(self, endpoint: str, api_key: str, *, retries: int = 3,
                 backoff_base: float = 1.0, timeout: float = 120.0,
                 client: httpx.Client | None = None,
                 sleep: Callable[[float], None] = time.sleep):
        self.endpoint = endpoint
        self._api_key = api_key
        self.retries = retries
        self.backoff_base = backoff_base
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def __repr__(self) -> str:
        return f"HttpBackend({self.endpoint!r})"

    def complete(self, model_id: str, temperature: float, messages: Sequence[Message]) -> str:
        body = {
            "model": model_id,
            "temperature": temperature,
            "messages": [m.to_dict() for m in messages],
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        last: TransportError | None = None
        for attempt in range(1, self.retries + 2):
            if attempt > 1:
                self._sleep(self.backoff_base * 2 ** (attempt - 2))
            try:
                resp = self._client.post(self.endpoint, json=body, headers=headers)
            except httpx.HTTPError as e:
                last = TransportError(f"request failed: {type(e).__name__}", attempts=attempt)
                log.warning("completion attempt %d failed: %s", attempt, last)
                continue
            if resp.is_success:
                return _first_choice(resp)
            retryable = resp.status_code == 429 or resp.status_code >= 500
            last = TransportError(
                f"HTTP {resp.status_code}: {resp.text[:BODY_SNIPPET]}",
                status=resp.status_code, attempts=attempt, retryable=retryable,
            )
            if not retryable:
                raise last
            log.warning("completion attempt %d failed: HTTP %d", attempt, resp.status_code)
        assert last is not None
        raise last


def _first_choice(resp: httpx.Response) -> str:
    try:
        data = resp.json()
        choices = data["choices"]
        if not choices:
            raise ProtocolError("response has no choices")
        content = choices[0]["message"]["content"]
    except (ValueError, KeyError, TypeError, IndexError) as e:
        raise ProtocolError(f"malformed completion response: {e!r}") from e
    if not isinstance(content, str) or not content:
        raise ProtocolError("first choice has empty content")
    return content


@dataclass
class ChatThread:
    """An append-only message stack bound to one model and backend."""

    backend: CompletionBackend
    model_id: str = "gpt-3.5-turbo"
    temperature: float = 0.0
    messages: list[Message] = field(default_factory=list)
    token_budget: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        msgs, self.messages = self.messages, []
        for m in msgs:
            self.append(m)

    def __len__(self) -> int:
        return len(self.messages)

    def append(self, message: Message) -> None:
        if message.role == "system" and any(m.role != "system" for m in self.messages):
            raise ValueError("system messages must form a contiguous prefix")
        self.messages.append(message)

    def add(self, role: Role, content: str) -> Message:
        msg = Message(role, content)
        self.append(msg)
        return msg

    def _complete(self, stack: list[Message]) -> Message:
        if self.token_budget is not None:
            used = sum(estimate_tokens(m.content) for m in stack)
            if used > self.token_budget:
                raise ContextOverflowError(
                    f"message stack needs ~{used} tokens, budget is {self.token_budget}"
                )
        return Message("assistant", self.backend.complete(self.model_id, self.temperature, stack))

    def send(self, prompt: str) -> Message:
        """Append ``prompt`` and the model's reply; nothing is appended on error."""
        user = Message("user", prompt)
        reply = self._complete([*self.messages, user])
        self.messages.append(user)
        self.messages.append(reply)
        return reply

    def generate(self) -> Message:
        """Ask for a completion of the current stack and append it."""
        reply = self._complete(list(self.messages))
        self.messages.append(reply)
        return reply


def send(thread: ChatThread, prompt: str) -> Message:
    return thread.send(prompt)


def http_complete(thread: ChatThread, endpoint: str, api_key: str, *,
                  cache: ReplayCache | None = None, **kwargs) -> Message:
    """One completion of ``thread``'s stack against a live endpoint.

    The thread itself is not modified.
    """
    backend: CompletionBackend = HttpBackend(endpoint, api_key, **kwargs)
    if cache is not None:
        backend = RecordingBackend(backend, cache)
    text = backend.complete(thread.model_id, thread.temperature, thread.messages)
    return Message("assistant", text)
