#!/usr/bin/env python3
"""Triage a directory of C files and write table, JSON and CSV reports side by side.

    python scripts/triage_corpus.py samples/ --esbmc /opt/esbmc/bin/esbmc -j 8 --out-dir reports/
"""

from pathlib import Path

import click

from cexrepair.triage import render_report, run_corpus
from cexrepair.verifier import PROFILES, VerifierConfig


@click.command()
@click.argument("corpus", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--esbmc", default="esbmc", show_default=True)
@click.option("--profile", type=click.Choice(sorted(PROFILES)), default="triage", show_default=True)
@click.option("--timeout", type=float, default=10.0, show_default=True)
@click.option("-j", "--jobs", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--out-dir", type=click.Path(file_okay=False, path_type=Path), default=Path("reports"),
              show_default=True)
def main(corpus, esbmc, profile, timeout, jobs, out_dir):
    cfg = VerifierConfig.for_profile(profile, binary_path=esbmc, timeout=timeout)
    report = run_corpus(corpus, cfg, jobs)
    out_dir.mkdir(parents=True, exist_ok=True)
    for fmt in ("table", "json", "csv"):
        ext = "txt" if fmt == "table" else fmt
        (out_dir / f"triage.{ext}").write_text(render_report(report, fmt), encoding="utf-8")
    click.echo(render_report(report, "table"), nl=False)
    click.echo(f"reports written to {out_dir}/")


if __name__ == "__main__":
    main()
