"""Command-line entry point.

Exit codes: 0 success, 1 other failure, 2 repair attempts exhausted,
3 model transport failure, 64 configuration error, 69 verifier unavailable.
"""

from __future__ import annotations

import logging
import shutil
import sys
from pathlib import Path

import click

from . import session
from .config import ConfigError, load_config
from .genbench import GenSpec, generate_samples
from .llm import GatewayError
from .prompts import load_catalog, lint_system_message
from .repair import CompilerNotFoundError
from .triage import parse_report_json, render_report, run_corpus

FORMATS = click.Choice(["table", "json", "csv"])


def _config(ctx: click.Context, overrides: dict, need_llm: bool = False):
    obj = ctx.obj
    try:
        return load_config(obj["config_paths"], None, {**obj["overrides"], **overrides},
                           need_llm=need_llm)
    except ConfigError as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(session.EXIT_CONFIG)


def _backend(ctx: click.Context, config):
    try:
        return session.make_backend(config)
    except (GatewayError, ValueError, OSError) as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(session.EXIT_CONFIG)


@click.group()
@click.option("--config", "config_paths", multiple=True, type=click.Path(dir_okay=False),
              help="TOML config file (repeatable, later files win).")
@click.option("--backend", help="live, replay or scripted:PATH.")
@click.option("--model", help="Model id.")
@click.option("--esbmc", "esbmc", help="Path to the ESBMC binary.")
@click.option("--cache", type=click.Path(dir_okay=False), help="Replay cache (JSONL).")
@click.option("--sessions", type=click.Path(file_okay=False), help="Session log directory.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def cli(ctx, config_paths, backend, model, esbmc, cache, sessions, verbose):
    """Counterexample-guided repair of C programs with ESBMC and a chat model."""
    logging.basicConfig(level=logging.WARNING - 10 * verbose, format="%(levelname)s %(message)s")
    ctx.obj = {
        "config_paths": list(config_paths),
        "overrides": {
            "llm.backend": backend,
            "llm.model": model,
            "verifier.binary": esbmc,
            "llm.cache": cache,
            "paths.sessions": sessions,
        },
    }


def _verifier_opts(f):
    f = click.option("--timeout", type=float, help="Verifier timeout in seconds.")(f)
    f = click.option("--unwind", type=click.IntRange(min=1), help="Loop unwind bound.")(f)
    f = click.option("--profile", help="Verifier flag profile (triage, overflow-kinduction).")(f)
    return f


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_verifier_opts
@click.option("--max-attempts", type=click.IntRange(min=1))
@click.option("--keep-artifacts", is_flag=True)
@click.pass_context
def chat(ctx, file, profile, unwind, timeout, max_attempts, keep_artifacts):
    """Talk to the model about FILE; /fix-code repairs it, /exit quits."""
    config = _config(ctx, {
        "verifier.profile": profile, "verifier.unwind": unwind,
        "verifier.timeout": timeout, "repair.max_attempts": max_attempts,
    }, need_llm=True)
    backend = _backend(ctx, config)
    ctx.exit(session.chat_repl(file, config, backend, keep_artifacts=keep_artifacts))


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@_verifier_opts
@click.option("--max-attempts", type=click.IntRange(min=1),
              help="Repair attempts (default 10). Useful fixes tend to come within "
                   "about 3 iterations; quality drops after 4-5.")
@click.option("--feedback", type=click.Choice(["full_trace", "property_only"]))
@click.option("--in-place", is_flag=True, help="Overwrite FILE instead of writing FILE.fixed.c.")
@click.option("--keep-artifacts", is_flag=True, help="Keep attempt files after a successful fix.")
@click.pass_context
def fix(ctx, file, profile, unwind, timeout, max_attempts, feedback, in_place, keep_artifacts):
    """Verify FILE and repair it until the verifier accepts it."""
    config = _config(ctx, {
        "verifier.profile": profile, "verifier.unwind": unwind,
        "verifier.timeout": timeout, "repair.max_attempts": max_attempts,
        "repair.feedback": feedback,
    }, need_llm=True)
    backend = _backend(ctx, config)
    ctx.exit(session.cmd_fix(file, config, backend, in_place=in_place,
                             keep_artifacts=keep_artifacts))


@cli.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@_verifier_opts
@click.option("--jobs", "-j", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--format", "fmt", type=FORMATS, default="table", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), help="Write the report here.")
@click.option("--no-timings", is_flag=True, help="Omit per-file durations.")
@click.pass_context
def triage(ctx, directory, profile, unwind, timeout, jobs, fmt, out, no_timings):
    """Verify every .c file in DIRECTORY and count S/U/B/O categories."""
    config = _config(ctx, {
        "verifier.profile": profile, "verifier.unwind": unwind, "verifier.timeout": timeout,
    })
    if shutil.which(config.verifier.binary_path) is None:
        click.echo(f"error: verifier not found: {config.verifier.binary_path}", err=True)
        ctx.exit(session.EXIT_UNAVAILABLE)
    try:
        report = run_corpus(directory, config.verifier, jobs)
    except FileNotFoundError as e:
        click.echo(f"error: {e}", err=True)
        ctx.exit(session.EXIT_FAILURE)
    text = render_report(report, fmt, timings=not no_timings)
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


@cli.command()
@click.option("-n", "count", type=click.IntRange(min=1), required=True, help="Samples to generate.")
@click.option("--temperature", type=click.FloatRange(0, 2))
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default="samples",
              show_default=True)
@click.option("--prefix", default="sample", show_default=True)
@click.option("--repair-compile", is_flag=True, help="Feed compiler errors back to the model.")
@click.option("--jobs", "-j", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_context
def gen(ctx, count, temperature, out_dir, prefix, repair_compile, jobs):
    """Generate COUNT C samples with the generation prompt."""
    config = _config(ctx, {"temperature.generation": temperature}, need_llm=True)
    backend = _backend(ctx, config)
    spec = GenSpec(count, Path(out_dir), temperature=config.temperatures["generation"],
                   naming_prefix=prefix, repair_compile=repair_compile, jobs=jobs)
    try:
        report = generate_samples(spec, backend, model_id=config.model_id,
                                  compiler_cmd=config.compiler_cmd,
                                  catalog=load_catalog(config.prompt_dir))
    except CompilerNotFoundError as e:
        click.echo(f"config error: {e}", err=True)
        ctx.exit(session.EXIT_CONFIG)
    click.echo(
        f"generated={report.generated} compiled_first_try={report.compiled_first_try} "
        f"compiled_after_repair={report.compiled_after_repair} failed={report.failed}"
    )
    ctx.exit(session.EXIT_OK if report.failed == 0 else session.EXIT_FAILURE)


@cli.command()
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--format", "fmt", type=FORMATS, default="table", show_default=True)
@click.option("--no-timings", is_flag=True)
@click.pass_context
def report(ctx, file, fmt, no_timings):
    """Re-render a JSON triage report as a table, CSV or JSON."""
    try:
        rep = parse_report_json(Path(file).read_text(encoding="utf-8"))
    except (ValueError, KeyError) as e:
        click.echo(f"error: {file} is not a triage report: {e}", err=True)
        ctx.exit(session.EXIT_FAILURE)
    click.echo(render_report(rep, fmt, timings=not no_timings), nl=False)


@cli.command("lint-prompt")
@click.argument("target", default="fix-system")
@click.pass_context
def lint_prompt(ctx, target):
    """Lint a system message: a catalog id or a text file."""
    path = Path(target)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
    else:
        config = _config(ctx, {})
        catalog = load_catalog(config.prompt_dir)
        if target not in catalog:
            click.echo(f"unknown prompt id {target!r}", err=True)
            ctx.exit(session.EXIT_FAILURE)
        text = catalog[target].text
    rep = lint_system_message(text)
    click.echo(f"estimated tokens     {rep.estimated_tokens}")
    click.echo(f"opens with purpose   {rep.opens_with_purpose}")
    click.echo(f"absolute-term ratio  {rep.absolute_term_ratio:.2f}")
    click.echo(f"ends with OK request {rep.ends_with_ok_request}")
    for f in rep.findings:
        click.echo(f"- {f}")
    ctx.exit(session.EXIT_OK if rep.ok else session.EXIT_FAILURE)


def main() -> None:
    cli(prog_name="cexrepair")


if __name__ == "__main__":
    sys.exit(main())
