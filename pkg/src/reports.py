"""CSV and markdown emission for run records, score reports and anytime curves."""

import csv
import io
import logging
from pathlib import Path
from typing import Sequence

from src.bench import AnytimeCurve, ScoreReport
from src.models import EventRecord, RunRecord

logger = logging.getLogger(__name__)

RUNS_FILE = "runs.csv"
EVENTS_FILE = "events.csv"

RUN_COLUMNS = [
    "run_id",
    "domain",
    "params",
    "eval",
    "tiebreak",
    "heur",
    "prune_heur",
    "lookahead",
    "expansions",
    "generations",
    "reopenings",
    "duplicates_pruned",
    "bound_prunes",
    "heuristic_calls",
    "discovery_expansions",
    "discovery_ms",
    "first_cost",
    "first_size",
    "best_cost",
    "best_size",
    "status",
    "oracle_cost",
    "wall_ms",
    # appended after the published schema
    "problem_id",
    "variant",
    "proof_expansions",
    "lookahead_invocations",
    "max_cost",
    "error",
]
EVENT_COLUMNS = ["run_id", "event_index", "expansions_at_event", "ms_at_event", "cost", "size", "plan"]
SCORE_COLUMNS = ["problem_id", "run_id", "quality", "coverage_flag"]
AGGREGATE_ROW = "*aggregate*"
SCORE_RULE = "IPC-2008 quality rule: reference cost / achieved cost, 0 when unsolved"

_INT_FIELDS = {
    "expansions",
    "generations",
    "reopenings",
    "duplicates_pruned",
    "bound_prunes",
    "heuristic_calls",
    "discovery_expansions",
    "discovery_ms",
    "first_cost",
    "first_size",
    "best_cost",
    "best_size",
    "oracle_cost",
    "wall_ms",
    "proof_expansions",
    "lookahead_invocations",
    "max_cost",
}


class ReportIOError(OSError):
    """A report file could not be read or written; the message names the path."""


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def _ratio(value) -> str:
    return f"{float(value):.6f}"


def _render(columns: Sequence[str], rows: Sequence[Sequence]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="")
    except OSError as e:
        raise ReportIOError(f"cannot write {path}: {e}") from e
    logger.info(f"Wrote {path}")


# Renderers


def render_runs(records: Sequence[RunRecord]) -> str:
    return _render(RUN_COLUMNS, [[getattr(r, c) for c in RUN_COLUMNS] for r in records])


def render_events(records: Sequence[RunRecord]) -> str:
    rows = []
    for record in records:
        for e in record.events:
            rows.append(
                [record.run_id, e.event_index, e.expansions_at_event, e.ms_at_event, e.cost, e.size, " ".join(e.plan)]
            )
    return _render(EVENT_COLUMNS, rows)


def render_scores(report: ScoreReport) -> str:
    rows = [[row.problem_id, row.run_id, _ratio(row.quality), int(row.solved)] for row in report.rows]
    for variant in sorted(report.aggregates):
        rows.append([AGGREGATE_ROW, variant, _ratio(report.aggregates[variant]), report.coverage[variant]])
    return _render(SCORE_COLUMNS, rows)


def render_curve(curve: AnytimeCurve) -> str:
    variants = sorted(curve.per_variant)
    rows = [
        [instant, *(_ratio(curve.per_variant[v][i]) for v in variants)]
        for i, instant in enumerate(curve.instants)
    ]
    return _render([curve.axis.value, *variants], rows)


def render_markdown(report: ScoreReport) -> str:
    """Variants as rows with score percentage, coverage and dense rank."""
    ranks = report.ranks()
    lines = [
        f"# IPC score ({SCORE_RULE})",
        "",
        f"Reference: {report.reference.value}. Problems: {report.problem_count}.",
        "",
        "| Variant | Score % | Coverage | Rank |",
        "|---|---:|---:|---:|",
    ]
    for variant in sorted(ranks, key=lambda v: (ranks[v], v)):
        percentage = float(report.percentage(variant))
        lines.append(
            f"| {variant} | {percentage:.1f} | {report.coverage[variant]}/{report.problem_count} | {ranks[variant]} |"
        )
    return "\n".join(lines) + "\n"


# Emitters


def emit_records(records: Sequence[RunRecord], out_dir: str | Path) -> tuple[Path, Path]:
    """Write runs.csv and events.csv into ``out_dir``."""
    out = Path(out_dir)
    runs_path, events_path = out / RUNS_FILE, out / EVENTS_FILE
    _write(runs_path, render_runs(records))
    _write(events_path, render_events(records))
    return runs_path, events_path


def emit_csv(obj, path: str | Path) -> Path:
    """Emit records (into a directory), a ScoreReport or an AnytimeCurve as CSV."""
    path = Path(path)
    if isinstance(obj, ScoreReport):
        _write(path, render_scores(obj))
    elif isinstance(obj, AnytimeCurve):
        _write(path, render_curve(obj))
    else:
        emit_records(list(obj), path)
    return path


def emit_markdown(report: ScoreReport, path: str | Path) -> Path:
    path = Path(path)
    _write(path, render_markdown(report))
    return path


# Readers


def _read_rows(path: Path) -> list[dict[str, str]]:
    try:
        with path.open(newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))
    except OSError as e:
        raise ReportIOError(f"cannot read {path}: {e}") from e


def _parse_run(row: dict[str, str]) -> dict:
    data: dict = {}
    for key, value in row.items():
        if key in _INT_FIELDS:
            data[key] = int(value) if value else None
        elif key == "lookahead":
            data[key] = value == "true"
        elif key == "error":
            data[key] = value or None
        else:
            data[key] = value
    for key in ("expansions", "generations", "reopenings", "duplicates_pruned", "bound_prunes",
                "heuristic_calls", "lookahead_invocations", "wall_ms"):
        if data.get(key) is None:
            data[key] = 0
    if not data.get("problem_id"):
        data["problem_id"] = f"{data['domain']}:{data['params']}"
    if not data.get("variant"):
        data["variant"] = f"{data['eval']}/{data['heur']}"
    return data


def read_records(path: str | Path) -> list[RunRecord]:
    """Load records from a directory holding runs.csv (and events.csv), or from a runs.csv path."""
    path = Path(path)
    runs_path = path / RUNS_FILE if path.is_dir() else path
    events_path = runs_path.with_name(EVENTS_FILE)

    events: dict[str, list[EventRecord]] = {}
    if events_path.exists():
        for row in _read_rows(events_path):
            events.setdefault(row["run_id"], []).append(
                EventRecord(
                    event_index=int(row["event_index"]),
                    expansions_at_event=int(row["expansions_at_event"]),
                    ms_at_event=int(row["ms_at_event"]),
                    cost=int(row["cost"]),
                    size=int(row["size"]),
                    plan=row.get("plan", "").split(),
                )
            )

    records = []
    for row in _read_rows(runs_path):
        data = _parse_run(row)
        data["events"] = sorted(events.get(data["run_id"], []), key=lambda e: e.event_index)
        records.append(RunRecord(**data))
    return records


def read_all_records(paths: Sequence[str | Path]) -> list[RunRecord]:
    records = []
    for path in paths:
        records.extend(read_records(path))
    return records
