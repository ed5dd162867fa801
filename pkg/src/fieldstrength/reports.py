"""Rendering of report tables to CSV, JSON and markdown.

Rendering is byte-deterministic: rows are emitted in the order given, numbers
are formatted without locale or float noise, and files always end with a single
newline and use LF line endings.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Sequence

from .analytics import DisciplineStats, FieldStats
from .corpus import FieldTaxonomy, SummaryReport
from .errors import InputError
from .hca import threshold_label
from .rounding import format_pct, round_half_up

FORMATS = ("csv", "json", "markdown")
EXTENSIONS = {"csv": ".csv", "json": ".json", "markdown": ".md"}

FIELD_HEADER = ("field_code", "field_name", "discipline_code", "staff", "ts", "incidence_pct", "percentile_rank")
DISCIPLINE_HEADER = ("rank", "discipline_code", "discipline_name", "fields", "staff", "ts", "incidence_pct")
ZERO_TS_HEADER = ("field_code", "field_name", "discipline_code", "staff")
TOP_HEADER = ("position", "field_code", "field_name", "discipline_code", "staff", "ts", "incidence_pct")
CORRELATION_HEADER = ("ranking_a", "ranking_b", "fields", "rho")


@dataclass(frozen=True)
class Table:
    name: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def __post_init__(self):
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(f"table {self.name}: row width {len(row)} != {len(self.columns)} columns")


def check_format(fmt: str) -> str:
    if fmt not in FORMATS:
        raise InputError(f"unknown format {fmt!r}; valid formats: {', '.join(FORMATS)}")
    return fmt


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _json_value(value):
    if isinstance(value, Decimal):
        return float(value)
    return value


def render_csv(table: Table) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def render_json(table: Table) -> str:
    records = [{c: _json_value(v) for c, v in zip(table.columns, row)} for row in table.rows]
    return json.dumps({"table": table.name, "columns": list(table.columns), "rows": records},
                      indent=2, ensure_ascii=False) + "\n"


def _numeric(value) -> bool:
    return isinstance(value, (int, float, Decimal)) and not isinstance(value, bool)


def render_markdown(table: Table) -> str:
    cells = [[_cell(v) for v in row] for row in table.rows]
    widths = [max([len(c), 3] + [len(r[i]) for r in cells]) for i, c in enumerate(table.columns)]
    right = [bool(table.rows) and all(_numeric(r[i]) or r[i] is None for r in table.rows)
             for i in range(len(table.columns))]

    def line(values):
        padded = [v.rjust(w) if r else v.ljust(w) for v, w, r in zip(values, widths, right)]
        return "| " + " | ".join(padded) + " |"

    rule = "|" + "|".join(("-" * (w + 1) + ":") if r else ("-" * (w + 2)) for w, r in zip(widths, right)) + "|"
    out = [line(table.columns), rule] + [line(r) for r in cells]
    return "\n".join(out) + "\n"


def render(table: Table, fmt: str) -> str:
    fmt = check_format(fmt)
    if fmt == "csv":
        return render_csv(table)
    if fmt == "json":
        return render_json(table)
    return render_markdown(table)


def write_table(table: Table, out_dir, fmt: str) -> Path:
    path = Path(out_dir) / (table.name + EXTENSIONS[check_format(fmt)])
    path.write_bytes(render(table, fmt).encode("utf-8"))
    return path


# ----------------------------------------------------------------------------- table builders


def _pct(stats) -> Decimal:
    return Decimal(format_pct(stats.ts_count, stats.staff_count))


def field_table(name: str, fields: Iterable[FieldStats], taxonomy: FieldTaxonomy) -> Table:
    """Fields in display order (highest incidence first)."""
    ordered = sorted(fields, key=lambda f: (-f.incidence_exact, -f.staff_count, f.field_code))
    rows = tuple(
        (f.field_code, taxonomy.field_name(f.field_code), f.discipline_code, f.staff_count, f.ts_count, _pct(f),
         None if f.percentile_rank is None else round_half_up(f.percentile_rank, 1))
        for f in ordered
    )
    return Table(name, FIELD_HEADER, rows)


def discipline_table(name: str, rows: Sequence[DisciplineStats], taxonomy: FieldTaxonomy) -> Table:
    """Ranked discipline rows plus a closing total row (blank rank)."""
    body = [
        (d.rank, d.discipline_code, taxonomy.discipline_name(d.discipline_code), d.field_count, d.staff_count,
         d.ts_count, _pct(d))
        for d in sorted(rows, key=lambda d: d.rank)
    ]
    staff = sum(d.staff_count for d in rows)
    ts = sum(d.ts_count for d in rows)
    if staff:
        body.append((None, "TOTAL", "Total", sum(d.field_count for d in rows), staff, ts,
                     Decimal(format_pct(ts, staff))))
    return Table(name, DISCIPLINE_HEADER, tuple(body))


def zero_ts_table(name: str, fields: Sequence[FieldStats], taxonomy: FieldTaxonomy) -> Table:
    rows = tuple((f.field_code, taxonomy.field_name(f.field_code), f.discipline_code, f.staff_count) for f in fields)
    return Table(name, ZERO_TS_HEADER, rows)


def top_fields_table(name: str, fields: Sequence[FieldStats], taxonomy: FieldTaxonomy) -> Table:
    rows = tuple(
        (i, f.field_code, taxonomy.field_name(f.field_code), f.discipline_code, f.staff_count, f.ts_count, _pct(f))
        for i, f in enumerate(fields, start=1)
    )
    return Table(name, TOP_HEADER, rows)


def summary_table(name: str, report: SummaryReport) -> Table:
    labels = [threshold_label(p) for p in report.thresholds]
    columns = ("discipline_code", "discipline_name", "fields", "staff", "publications",
               *[f"hca_{lbl}" for lbl in labels])
    body = []
    for row in (*report.rows, report.total):
        body.append((row.discipline_code, row.discipline_name, row.n_fields, row.staff, row.publications,
                     *[row.hca_cell(p) for p in report.thresholds]))
    return Table(name, columns, tuple(body))


def correlation_table(name: str, entries: Sequence[tuple[str, str, int, float | None]]) -> Table:
    rows = tuple((a, b, n, None if rho is None else Decimal(repr(round(rho, 12)))) for a, b, n, rho in entries)
    return Table(name, CORRELATION_HEADER, rows)
