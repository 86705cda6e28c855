"""Layered configuration: defaults <- TOML file <- environment <- flags.

Credentials never come from the file body or from flags, only from the
environment or from a credentials file that is readable by its owner alone.
"""

from __future__ import annotations

import copy
import os
import stat
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .repair import DEFAULT_COMPILER_CMD, DEFAULT_MAX_ATTEMPTS
from .verifier import PROFILES, VerifierConfig

API_KEY_VARS = ("CEXREPAIR_API_KEY", "OPENAI_API_KEY")

DEFAULTS: dict[str, dict[str, Any]] = {
    "verifier": {
        "binary": "esbmc",
        "profile": "triage",
        "unwind": None,  # None: the profile's default
        "timeout": 10.0,
        "extra_flags": [],
    },
    "llm": {
        "model": "gpt-3.5-turbo",
        "endpoint": "https://api.openai.com/v1/chat/completions",
        "backend": "live",
        "cache": None,
        "token_budget": 16000,
        "retries": 3,
        "credentials_file": None,
    },
    "temperature": {
        "generation": 1.0,
        "repair": 0.0,
        "chat": 0.0,
    },
    "repair": {
        "max_attempts": DEFAULT_MAX_ATTEMPTS,
        "feedback": "full_trace",
        "compiler": list(DEFAULT_COMPILER_CMD),
    },
    "paths": {
        "prompts": None,
        "sessions": "sessions",
    },
}

ENV_VARS = {
    "CEXREPAIR_ESBMC": "verifier.binary",
    "CEXREPAIR_MODEL": "llm.model",
    "CEXREPAIR_ENDPOINT": "llm.endpoint",
    "CEXREPAIR_BACKEND": "llm.backend",
    "CEXREPAIR_CACHE": "llm.cache",
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AppConfig:
    verifier: VerifierConfig = field(default_factory=VerifierConfig)
    model_id: str = "gpt-3.5-turbo"
    endpoint: str = DEFAULTS["llm"]["endpoint"]
    backend: str = "live"
    temperatures: Mapping[str, float] = field(
        default_factory=lambda: dict(DEFAULTS["temperature"])
    )
    prompt_dir: Path | None = None
    cache_path: Path | None = None
    session_dir: Path = Path("sessions")
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    feedback_mode: str = "full_trace"
    compiler_cmd: tuple[str, ...] = DEFAULT_COMPILER_CMD
    token_budget: int | None = 16000
    retries: int = 3
    api_key: str | None = field(default=None, repr=False)


def _set(tree: dict, dotted: str, value: Any, origin: str) -> None:
    section, _, key = dotted.partition(".")
    if section not in DEFAULTS or key not in DEFAULTS[section]:
        raise ConfigError(f"{origin}: unknown config key {dotted!r}")
    tree[section][key] = value


def _merge_file(tree: dict, path: Path) -> None:
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}") from e
    unknown = []
    for section, body in data.items():
        if section not in DEFAULTS:
            unknown.append(section)
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: [{section}] must be a table")
        for key, value in body.items():
            if key not in DEFAULTS[section]:
                unknown.append(f"{section}.{key}")
            else:
                tree[section][key] = value
    if unknown:
        raise ConfigError(f"{path}: unknown config key(s): {', '.join(unknown)}")


def _read_credentials(path: Path) -> str:
    mode = stat.S_IMODE(path.stat().st_mode)
    if mode & 0o077:
        raise ConfigError(
            f"credentials file {path} has mode {mode:o}; run `chmod 600 {path}`"
        )
    key = path.read_text(encoding="utf-8").strip()
    if not key:
        raise ConfigError(f"credentials file {path} is empty")
    return key


def load_config(
    paths: list[str | Path] | tuple = (),
    environment: Mapping[str, str] | None = None,
    overrides: Mapping[str, Any] | None = None,
    *,
    need_llm: bool = False,
) -> AppConfig:
    """Resolve the effective configuration.

    ``overrides`` maps dotted keys (``"verifier.unwind"``) to flag values;
    ``None`` values are skipped. With ``need_llm`` a live backend must have
    an API key available.
    """
    env = os.environ if environment is None else environment
    tree = copy.deepcopy(DEFAULTS)
    for p in paths:
        p = Path(p)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        _merge_file(tree, p)
    for var, dotted in ENV_VARS.items():
        if env.get(var):
            _set(tree, dotted, env[var], f"${var}")
    for dotted, value in (overrides or {}).items():
        if value is not None:
            _set(tree, dotted, value, "command line")

    v = tree["verifier"]
    if v["profile"] not in PROFILES:
        raise ConfigError(f"unknown verifier profile {v['profile']!r}; known: {', '.join(PROFILES)}")
    try:
        verifier = VerifierConfig.for_profile(
            v["profile"],
            binary_path=str(v["binary"]),
            extra_flags=tuple(v["extra_flags"]),
            timeout=float(v["timeout"]),
            **({"unwind": int(v["unwind"])} if v["unwind"] is not None else {}),
        )
    except (ValueError, TypeError) as e:
        raise ConfigError(str(e)) from e

    llm, rep, paths_ = tree["llm"], tree["repair"], tree["paths"]
    backend = str(llm["backend"])
    if backend not in ("live", "replay") and not backend.startswith("scripted:"):
        raise ConfigError(f"backend must be live, replay or scripted:PATH, got {backend!r}")
    if backend.startswith("scripted:") and not Path(backend[len("scripted:"):]).is_file():
        raise ConfigError(f"scripted backend file not found: {backend[len('scripted:'):]}")
    if backend == "replay" and not llm["cache"]:
        raise ConfigError("replay backend needs llm.cache (or $CEXREPAIR_CACHE)")

    prompt_dir = Path(paths_["prompts"]) if paths_["prompts"] else None
    if prompt_dir is not None and not prompt_dir.is_dir():
        raise ConfigError(f"prompt directory not found: {prompt_dir}")
    if int(rep["max_attempts"]) < 1:
        raise ConfigError("repair.max_attempts must be >= 1")
    if rep["feedback"] not in ("full_trace", "property_only"):
        raise ConfigError("repair.feedback must be full_trace or property_only")
    temps = {k: float(x) for k, x in tree["temperature"].items()}
    for mode, t in temps.items():
        if not 0.0 <= t <= 2.0:
            raise ConfigError(f"temperature.{mode} must be in [0, 2]")

    api_key = next((env[k] for k in API_KEY_VARS if env.get(k)), None)
    if api_key is None and llm["credentials_file"]:
        api_key = _read_credentials(Path(llm["credentials_file"]).expanduser())
    if need_llm and backend == "live" and not api_key:
        raise ConfigError(
            f"no API key: set ${API_KEY_VARS[0]} or point llm.credentials_file at a mode-600 file"
        )

    return AppConfig(
        verifier=verifier,
        model_id=str(llm["model"]),
        endpoint=str(llm["endpoint"]),
        backend=backend,
        temperatures=temps,
        prompt_dir=prompt_dir,
        cache_path=Path(llm["cache"]) if llm["cache"] else None,
        session_dir=Path(paths_["sessions"]),
        max_attempts=int(rep["max_attempts"]),
        feedback_mode=rep["feedback"],
        compiler_cmd=tuple(rep["compiler"]),
        token_budget=int(llm["token_budget"]) if llm["token_budget"] else None,
        retries=int(llm["retries"]),
        api_key=api_key,
    )
