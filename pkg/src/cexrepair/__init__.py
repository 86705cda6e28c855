"""Counterexample-guided repair of C programs with a bounded model checker and a chat model."""

from .llm import ChatThread, Message, ReplayBackend, ReplayCache, ScriptedBackend, cache_key
from .prompts import builtin_catalog, lint_system_message, render
from .repair import compile_gate, extract_code, fix_code, repair_compilation
from .triage import TriageCategory, classify, render_report, run_corpus
from .verifier import (
    Counterexample,
    Failed,
    Successful,
    Timeout,
    ToolError,
    Unknown,
    VerifierConfig,
    ViolatedProperty,
    counterexample_to_prompt_text,
    parse_verifier_output,
    run_verifier,
)

__version__ = "0.1.0"
