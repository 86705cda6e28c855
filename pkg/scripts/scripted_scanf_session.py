#!/usr/bin/env python3
"""Replay the scanf repair end to end without a live model.

The bundled scanf sample is verified, discussed in chat, and repaired with
/fix-code. The model is scripted to answer with the %s -> %9s fix, and the
verifier re-checks the candidate. Without an ESBMC binary the deterministic
stand-in from tests/fixtures is used.
"""

import io
import shutil
import tempfile
from importlib.resources import files
from pathlib import Path

import click

from cexrepair.config import load_config
from cexrepair.llm import ScriptedBackend
from cexrepair.session import chat_repl
from cexrepair.transcript import SessionTranscript

STAND_IN = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "fake_esbmc.py"


@click.command()
@click.option("--esbmc", help="Checker binary (default: esbmc on PATH, else the test stand-in).")
@click.option("--sessions", type=click.Path(file_okay=False), default=None,
              help="Keep the JSONL transcript here.")
def main(esbmc, sessions):
    binary = esbmc or shutil.which("esbmc") or str(STAND_IN)
    work = Path(tempfile.mkdtemp(prefix="scanf-session-"))
    src = work / "r.c"
    src.write_text(files("cexrepair").joinpath("samples/scanf_overflow.c").read_text())
    fixed = src.read_text().replace('scanf("%s", word);', 'scanf("%9s", word);')

    backend = ScriptedBackend([
        "scanf with a bare %s writes as many bytes as the user types into a 10-byte buffer.",
        "Certainly, here is the corrected code:\n```c\n" + fixed + "```\n",
    ])
    cfg = load_config([], {}, {
        "verifier.binary": binary,
        "verifier.profile": "triage",
        "paths.sessions": sessions or str(work / "sessions"),
    })
    transcript = SessionTranscript(cfg.session_dir)
    click.echo(f"checker: {binary}")
    click.echo(f"source:  {src}\n")
    out = io.StringIO()
    chat_repl(src, cfg, backend, stdin=io.StringIO("/fix-code\n/exit\n"), out=out,
              transcript=transcript)
    click.echo(out.getvalue())
    click.echo(f"transcript: {transcript.path}")


if __name__ == "__main__":
    main()
