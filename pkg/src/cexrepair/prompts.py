"""Prompt templates, the built-in catalog, and a system-message linter.

Templates use ``{name}`` placeholders; ``{{`` and ``}}`` produce literal
braces. Any other brace is left alone, so C code in a template body is safe.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

_TOKEN_RE = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")

MAX_SYSTEM_TOKENS = 600
MIN_ABSOLUTE_RATIO = 0.5


class MissingBindingError(KeyError):
    def __init__(self, name: str, template_id: str):
        super().__init__(name)
        self.name = name
        self.template_id = template_id

    def __str__(self) -> str:
        return f"template {self.template_id!r} needs a binding for {{{self.name}}}"


class UnusedBindingWarning(UserWarning):
    pass


def placeholders(text: str) -> frozenset[str]:
    return frozenset(m.group(1) for m in _TOKEN_RE.finditer(text) if m.group(1))


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    text: str
    # "verbatim": frozen text, never edited; "authored": written for this tool; "override": loaded from a prompt dir
    origin: str = "authored"
    required_bindings: frozenset[str] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "required_bindings", placeholders(self.text))


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    missing = sorted(template.required_bindings - bindings.keys())
    if missing:
        raise MissingBindingError(missing[0], template.id)
    extra = sorted(bindings.keys() - template.required_bindings)
    if extra:
        warnings.warn(
            f"template {template.id!r} ignores bindings: {', '.join(extra)}",
            UnusedBindingWarning,
            stacklevel=2,
        )

    def sub(m: re.Match) -> str:
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        return bindings[m.group(1)]

    return _TOKEN_RE.sub(sub, template.text)


GEN_C_SAMPLE = (
    "Generate a minimum of 10 and a maximum of 50 lines of C code. "
    "Use at least two functions. Use strings, arrays, bit manipulations, "
    "and string manipulations inside the code. Be creative! Always include "
    "every necessary header. Only give me the code without any explanation. "
    "No comment in the code."
)

FIX_CODE = (
    "We have the following vulnerable code: \n"
    "--{content}--. Fix it based on this:\n"
    "{counterexample_from_ESBMC}.  \n"
    "Always add header to the code, \n"
    "Give me the pure code that can \n"
    "be compiled"
)

CHAT_SYSTEM = (
    "You are a security assistant that explains vulnerabilities in C programs "
    "using the output of the ESBMC bounded model checker. "
    "You shall treat the ESBMC counterexample as ground truth about the program. "
    "You shall not claim the code is safe while ESBMC reports a violated property. "
    "You shall refer to the violated property by its file, line, function and kind. "
    "You shall explain the root cause in terms of the program's variables and control flow. "
    "You shall keep answers short and technical. "
    "You shall not discuss problems unrelated to the reported property unless the user asks about them. "
    "You shall answer questions about the source code, the counterexample and possible fixes. "
    "You shall put any code in a Markdown block fenced with three backticks. "
    "You shall not invent library functions or compiler behavior. "
    "You shall say that you are unsure when the counterexample does not settle a question. "
    "You shall read the source code and the ESBMC output from the messages that follow. "
    "Reply with OK if you understand these instructions."
)

CHAT_CONTEXT = (
    "Source code under analysis:\n"
    "```c\n{source_code}\n```\n"
    "\n"
    "ESBMC output for this source code:\n"
    "```\n{verifier_output}\n```"
)

CHAT_INITIAL = (
    "Explain the ESBMC output for this program. Name the line of code that "
    "triggers the violated property and describe why it fails. If verification "
    "succeeded, say so in one sentence."
)

FIX_SYSTEM = (
    "You are a program repair engine for C source code. "
    "You shall output only the complete corrected source code inside one Markdown block fenced with three backticks. "
    "You shall not write any explanation, greeting or acknowledgment outside the code block. "
    "You shall fix the property violation reported by the ESBMC bounded model checker, or the compiler errors you are given. "
    "You shall preserve the behavior of the program apart from the fix. "
    "You shall keep every function and every output of the original program unless the fix requires a change. "
    "You shall include every header the code needs. "
    "You shall use bounds checks, NULL checks and wider integer types where they remove the violation. "
    "You shall not add comments to the code. "
    "You shall not remove the main function. "
    "You shall treat each new ESBMC counterexample as feedback on your previous answer and correct that answer. "
    "Reply with OK if you understand these instructions."
)

FIX_COMPILE = (
    "The following C code does not compile:\n"
    "--{content}--\n"
    "The compiler reported:\n"
    "{diagnostics}\n"
    "Always add header to the code, \n"
    "Give me the pure code that can \n"
    "be compiled"
)

_BUILTIN = (
    PromptTemplate("gen-c-sample", GEN_C_SAMPLE, origin="verbatim"),
    PromptTemplate("fix-code", FIX_CODE, origin="verbatim"),
    PromptTemplate("chat-system", CHAT_SYSTEM),
    PromptTemplate("chat-context", CHAT_CONTEXT),
    PromptTemplate("chat-initial", CHAT_INITIAL),
    PromptTemplate("fix-system", FIX_SYSTEM),
    PromptTemplate("fix-compile", FIX_COMPILE),
)


def builtin_catalog() -> dict[str, PromptTemplate]:
    catalog = {t.id: t for t in _BUILTIN}
    assert len(catalog) == len(_BUILTIN), "duplicate template id"
    return catalog


def load_catalog(directory: str | Path | None = None) -> dict[str, PromptTemplate]:
    """Built-in catalog, with ``<id>.txt`` files from ``directory`` overriding it."""
    catalog = builtin_catalog()
    if directory is None:
        return catalog
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"prompt directory not found: {directory}")
    for path in sorted(directory.glob("*.txt")):
        catalog[path.stem] = PromptTemplate(
            path.stem, path.read_text(encoding="utf-8"), origin="override"
        )
    return catalog


# ---------------------------------------------------------------------------
# system message lint

_SENT_SPLIT = re.compile(r"(?<=[.!?])\s+")
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)])\s+")
_PURPOSE = re.compile(
    r"^(you are\b|you shall (?:act|be|serve) as\b|act as\b|you act as\b|"
    r"your (?:role|purpose|task|job|goal) is\b|as an? \w+)",
    re.IGNORECASE,
)
_OK_REQUEST = re.compile(
    r"\b(?i:reply|respond|answer|say|acknowledge)\b.*?[\"'`“]?\bOK\b"
)
_ABSOLUTE_PREFIX = re.compile(
    r"^(you shall|you must|you will|never|always|do not|don't|only)\b", re.IGNORECASE
)
IMPERATIVE_VERBS = frozenset("""
    add answer ask avoid check consider describe ensure explain fix focus follow
    generate give include keep list make output preserve provide refer remove
    reply respond return state treat use write
""".split())


@dataclass(frozen=True)
class SystemMessageReport:
    estimated_tokens: int
    ends_with_ok_request: bool
    absolute_term_ratio: float
    opens_with_purpose: bool
    findings: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.findings


def sentences(text: str) -> list[str]:
    out = []
    for line in text.splitlines():
        line = _BULLET.sub("", line).strip()
        out.extend(s.strip() for s in _SENT_SPLIT.split(line) if s.strip())
    return out


def _is_absolute(sentence: str) -> bool:
    if _ABSOLUTE_PREFIX.match(sentence):
        return True
    first = re.match(r"[A-Za-z']+", sentence)
    return bool(first) and first.group(0).lower() in IMPERATIVE_VERBS


def lint_system_message(text: str) -> SystemMessageReport:
    tokens = math.ceil(len(text.encode("utf-8")) / 4)
    sents = sentences(text)
    opens = bool(sents) and bool(_PURPOSE.match(sents[0]))
    ends_ok = bool(sents) and bool(_OK_REQUEST.search(sents[-1]))
    ratio = sum(map(_is_absolute, sents)) / len(sents) if sents else 0.0

    findings = []
    if not opens:
        findings.append("does not open by stating the assistant's role or purpose")
    if ratio < MIN_ABSOLUTE_RATIO:
        findings.append(
            f"only {ratio:.0%} of sentences are absolute instructions "
            f"(\"You shall ...\"); want at least {MIN_ABSOLUTE_RATIO:.0%}"
        )
    if not ends_ok:
        findings.append("does not end by asking for an \"OK\" acknowledgment")
    if tokens == 0:
        findings.append("message is empty")
    elif tokens > MAX_SYSTEM_TOKENS:
        findings.append(f"~{tokens} tokens is over the {MAX_SYSTEM_TOKENS}-token limit")
    return SystemMessageReport(tokens, ends_ok, ratio, opens, tuple(findings))
