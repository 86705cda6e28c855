"""Sort verification outcomes into S / U / B / O and summarize a corpus."""

from __future__ import annotations

import csv
import enum
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

from .verifier import (
    Failed,
    Successful,
    Timeout,
    ToolError,
    Unknown,
    VerificationOutcome,
    VerifierConfig,
    run_verifier,
)

SCANF_KIND = "buffer overflow on scanf"


class TriageCategory(str, enum.Enum):
    S = "S"  # verification successful
    U = "U"  # unknown: no verdict, timeout or tool error
    B = "B"  # buffer overflow rooted in scanf
    O = "O"  # other vulnerability

    @property
    def label(self) -> str:
        return _LABELS[self]


_LABELS = {
    TriageCategory.S: "Verification Successful",
    TriageCategory.U: "Verification Unknown",
    TriageCategory.B: "Buffer Overflows Based on Scanf",
    TriageCategory.O: "Other Vulnerabilities",
}


def classify(outcome: VerificationOutcome) -> TriageCategory:
    # only the first violated property counts
    if isinstance(outcome, Successful):
        return TriageCategory.S
    if isinstance(outcome, Failed):
        if SCANF_KIND in outcome.violated_property.kind.lower():
            return TriageCategory.B
        return TriageCategory.O
    if isinstance(outcome, (Unknown, Timeout, ToolError)):
        return TriageCategory.U
    raise TypeError(f"not a verification outcome: {outcome!r}")


@dataclass(frozen=True)
class CorpusRow:
    file: str
    category: TriageCategory
    kind: str | None = None
    line: int | None = None
    function: str | None = None
    verify_duration: float = 0.0


@dataclass
class CorpusReport:
    rows: list[CorpusRow]
    counts: dict[TriageCategory, int] = field(init=False)
    total: int = field(init=False)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: r.file)
        self.counts = {c: 0 for c in TriageCategory}
        for row in self.rows:
            self.counts[row.category] += 1
        self.total = len(self.rows)

    def to_dict(self, timings: bool = True) -> dict:
        rows = []
        for r in self.rows:
            d = asdict(r)
            d["category"] = r.category.value
            if not timings:
                del d["verify_duration"]
            rows.append(d)
        return {
            "rows": rows,
            "counts": {c.value: n for c, n in self.counts.items()},
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CorpusReport":
        rows = [
            CorpusRow(
                file=r["file"],
                category=TriageCategory(r["category"]),
                kind=r.get("kind"),
                line=r.get("line"),
                function=r.get("function"),
                verify_duration=r.get("verify_duration", 0.0),
            )
            for r in data["rows"]
        ]
        report = cls(rows)
        if report.total != data.get("total", report.total):
            raise ValueError("report total does not match its rows")
        return report


def _row(path: Path, cfg: VerifierConfig, verify) -> CorpusRow:
    t0 = time.monotonic()
    try:
        outcome = verify(path, cfg)
    except OSError as e:
        outcome = ToolError(str(e), "unreadable source")
    duration = time.monotonic() - t0
    cat = classify(outcome)
    if isinstance(outcome, Failed):
        p = outcome.violated_property
        return CorpusRow(path.name, cat, p.kind, p.line, p.function, duration)
    return CorpusRow(path.name, cat, verify_duration=duration)


def run_corpus(
    directory: str | Path,
    cfg: VerifierConfig,
    parallelism: int = 1,
    *,
    verify: Callable[[Path, VerifierConfig], VerificationOutcome] = run_verifier,
) -> CorpusReport:
    """Verify and classify every ``*.c`` file directly inside ``directory``."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    directory = Path(directory)
    files = sorted(p for p in directory.glob("*.c") if p.is_file())
    if not files:
        raise FileNotFoundError(f"no .c files in {directory}")
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        rows = list(pool.map(lambda p: _row(p, cfg, verify), files))
    return CorpusReport(rows)


CSV_HEADER = ("file", "category", "kind", "line", "function", "duration_ms")


def render_report(report: CorpusReport, fmt: str = "table", *, timings: bool = True) -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(timings), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in report.rows:
            w.writerow([
                r.file, r.category.value, r.kind or "", r.line or "", r.function or "",
                round(r.verify_duration * 1000) if timings else "",
            ])
        return buf.getvalue()
    if fmt == "table":
        return _table(report, timings)
    raise ValueError(f"unknown report format {fmt!r}")


def _table(report: CorpusReport, timings: bool) -> str:
    head = ["file", "cat", "kind", "line", "function"] + (["ms"] if timings else [])
    body = [
        [r.file, r.category.value, r.kind or "-", str(r.line or "-"), r.function or "-"]
        + ([str(round(r.verify_duration * 1000))] if timings else [])
        for r in report.rows
    ]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]

    def fmt(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()

    lines = [fmt(head), fmt(["-" * w for w in widths])]
    lines += [fmt(b) for b in body]
    lines.append("")
    for cat in TriageCategory:
        lines.append(f"{cat.value}  {cat.label:<32} {report.counts[cat]:>6}")
    lines.append(f"   {'Total':<32} {report.total:>6}")
    return "\n".join(lines) + "\n"


def parse_report_json(text: str) -> CorpusReport:
    return CorpusReport.from_dict(json.loads(text))
