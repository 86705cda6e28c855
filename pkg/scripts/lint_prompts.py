#!/usr/bin/env python3
"""Lint every system-message template in a prompt catalog.

    python scripts/lint_prompts.py [--prompts DIR]
"""

import sys

import click

from cexrepair.prompts import lint_system_message, load_catalog

SYSTEM_IDS = ("chat-system", "fix-system")


@click.command()
@click.option("--prompts", type=click.Path(exists=True, file_okay=False), default=None,
              help="Directory of <id>.txt overrides.")
def main(prompts):
    catalog = load_catalog(prompts)
    click.echo(f"{'id':<14}{'origin':<10}{'tokens':>7}{'ratio':>7}  purpose  ok-request")
    bad = 0
    for tid in SYSTEM_IDS:
        rep = lint_system_message(catalog[tid].text)
        click.echo(f"{tid:<14}{catalog[tid].origin:<10}{rep.estimated_tokens:>7}"
                   f"{rep.absolute_term_ratio:>7.2f}  {str(rep.opens_with_purpose):<8} "
                   f"{rep.ends_with_ok_request}")
        for f in rep.findings:
            click.echo(f"    - {f}")
        bad += not rep.ok
    sys.exit(1 if bad else 0)


if __name__ == "__main__":
    main()
