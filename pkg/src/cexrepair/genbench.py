"""Generate C sample corpora with the model and push them to compilability."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

from .llm import ChatThread, CompletionBackend, GatewayError
from .prompts import PromptTemplate, builtin_catalog, render
from .repair import DEFAULT_COMPILER_CMD, compile_gate, extract_code, repair_compilation

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenSpec:
    count: int
    output_dir: Path
    temperature: float = 1.0
    # advisory only: they live in the prompt text, nothing is enforced
    min_lines: int = 10
    max_lines: int = 50
    naming_prefix: str = "sample"
    repair_compile: bool = False
    max_repair_attempts: int = 3
    jobs: int = 1

    def __post_init__(self):
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if not self.min_lines < self.max_lines:
            raise ValueError("min_lines must be < max_lines")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")
        object.__setattr__(self, "output_dir", Path(self.output_dir))

    def filename(self, i: int) -> str:
        return f"{self.naming_prefix}{i}.c"


RowStatus = Literal["compiled", "repaired", "broken", "error"]


@dataclass(frozen=True)
class GenRow:
    index: int
    file: str | None
    status: RowStatus
    diagnostics: str = ""
    repair_attempts: int = 0


@dataclass
class GenReport:
    rows: list[GenRow]
    generated: int = field(init=False)
    compiled_first_try: int = field(init=False)
    needed_repair: int = field(init=False)
    compiled_after_repair: int = field(init=False)
    failed: int = field(init=False)

    def __post_init__(self):
        self.rows.sort(key=lambda r: r.index)
        st = [r.status for r in self.rows]
        self.generated = sum(r.file is not None for r in self.rows)
        self.compiled_first_try = st.count("compiled")
        self.compiled_after_repair = st.count("repaired")
        self.needed_repair = st.count("repaired") + st.count("broken")
        self.failed = st.count("broken") + st.count("error")


def _one(i: int, spec: GenSpec, backend: CompletionBackend, model_id: str,
         prompt: str, compiler_cmd: Sequence[str],
         catalog: dict[str, PromptTemplate]) -> GenRow:
    thread = ChatThread(backend, model_id, spec.temperature)
    try:
        reply = thread.send(prompt)
    except GatewayError as e:
        log.error("sample %d: %s", i, e)
        return GenRow(i, None, "error", str(e))
    code = extract_code(reply.content)
    path = spec.output_dir / spec.filename(i)
    path.write_text(code, encoding="utf-8")

    first = compile_gate(code, compiler_cmd)
    if first.ok:
        return GenRow(i, path.name, "compiled")
    if not spec.repair_compile:
        return GenRow(i, path.name, "broken", first.diagnostics)

    result = repair_compilation(
        code, spec.max_repair_attempts,
        lambda: ChatThread(backend, model_id, spec.temperature),
        compiler_cmd=compiler_cmd, catalog=catalog,
    )
    n = len(result.attempts)
    if result.fixed:
        path.write_text(result.final_code, encoding="utf-8")
        return GenRow(i, path.name, "repaired", repair_attempts=n)
    last = result.attempts[-1].outcome.diagnostics if result.attempts else first.diagnostics
    return GenRow(i, path.name, "broken", result.error or last, repair_attempts=n)


def generate_samples(
    spec: GenSpec,
    backend: CompletionBackend,
    *,
    model_id: str = "gpt-3.5-turbo",
    compiler_cmd: Sequence[str] = DEFAULT_COMPILER_CMD,
    catalog: dict[str, PromptTemplate] | None = None,
) -> GenReport:
    """Write ``spec.count`` samples named ``<prefix><i>.c``, ``i`` from 1.

    Each sample comes from its own single-turn thread.
    """
    catalog = catalog or builtin_catalog()
    prompt = render(catalog["gen-c-sample"], {})
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    indices = range(1, spec.count + 1)
    if spec.jobs == 1:
        rows = [_one(i, spec, backend, model_id, prompt, compiler_cmd, catalog) for i in indices]
    else:
        with ThreadPoolExecutor(spec.jobs) as pool:
            rows = list(pool.map(
                lambda i: _one(i, spec, backend, model_id, prompt, compiler_cmd, catalog),
                indices,
            ))
    return GenReport(rows)
