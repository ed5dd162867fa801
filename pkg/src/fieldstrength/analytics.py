"""Field- and discipline-level strength indicators.

Ordering decisions are made on exact rationals (``ts_count / staff_count`` as a
Fraction) so that ties are real ties and one-decimal display rounding never
feeds back into ranks.
"""

from __future__ import annotations

import bisect
import logging
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import AbstractSet, Iterable, Mapping, Sequence

from .corpus import Corpus, Researcher
from .errors import DataValidationError, InputError
from .rounding import format_pct, round_half_up
from .scoring import TopScientistSet

log = logging.getLogger(__name__)

DEFAULT_TAU = 0.5


@dataclass(frozen=True)
class FieldStats:
    field_code: str
    discipline_code: str
    staff_count: int
    ts_count: int
    percentile_rank: float | None = None

    def __post_init__(self):
        if self.staff_count < 1:
            raise DataValidationError(f"field {self.field_code} has no staff")
        if not 0 <= self.ts_count <= self.staff_count:
            raise DataValidationError(
                f"field {self.field_code}: ts_count {self.ts_count} outside [0, {self.staff_count}]"
            )

    @property
    def incidence_exact(self) -> Fraction:
        return Fraction(self.ts_count, self.staff_count)

    @property
    def incidence(self) -> float:
        return self.ts_count / self.staff_count

    @property
    def incidence_pct(self) -> str:
        return format_pct(self.ts_count, self.staff_count)


@dataclass(frozen=True)
class DisciplineStats:
    discipline_code: str
    field_count: int
    staff_count: int
    ts_count: int
    rank: int

    @property
    def incidence_exact(self) -> Fraction:
        return Fraction(self.ts_count, self.staff_count)

    @property
    def incidence(self) -> float:
        return self.ts_count / self.staff_count

    @property
    def incidence_pct(self) -> str:
        return format_pct(self.ts_count, self.staff_count)


@dataclass(frozen=True)
class RankCorrelation:
    rho: float
    n: int


def _ratio(x: float) -> Fraction:
    return Fraction(repr(float(x)))


def field_eligibility(corpus: Corpus, tau: float = DEFAULT_TAU) -> frozenset[str]:
    """Fields where at least ``tau`` of the staff have one or more linked publications."""
    links = corpus.require_links()
    active = set(links["researcher_id"].unique().to_list())
    staffed = {r.field_code for r in corpus.roster}
    for fcode in sorted(set(corpus.taxonomy.field_to_discipline) - staffed):
        log.debug("field %s has no staff; excluded", fcode)
    return eligible_fields(corpus.roster, active, tau)


def eligible_fields(roster: Iterable[Researcher], active: AbstractSet[str], tau: float = DEFAULT_TAU) -> frozenset[str]:
    """Eligibility from the roster and the ids of researchers with at least one publication."""
    if not 0.0 <= tau <= 1.0:
        raise InputError(f"tau must lie in [0, 1], got {tau}")
    staff: dict[str, int] = {}
    publishing: dict[str, int] = {}
    for r in roster:
        staff[r.field_code] = staff.get(r.field_code, 0) + 1
        if r.researcher_id in active:
            publishing[r.field_code] = publishing.get(r.field_code, 0) + 1
    bound = _ratio(tau)
    eligible = set()
    for fcode in sorted(staff):
        if Fraction(publishing.get(fcode, 0), staff[fcode]) >= bound:
            eligible.add(fcode)
        else:
            log.debug("field %s below the activity threshold", fcode)
    return frozenset(eligible)


def incidence(field_code: str, ts: TopScientistSet, corpus: Corpus) -> FieldStats:
    staff = [r for r in corpus.roster if r.field_code == field_code]
    if not staff:
        raise DataValidationError(f"field {field_code} has no staff")
    hits = sum(1 for r in staff if r.researcher_id in ts.members)
    return FieldStats(field_code, corpus.taxonomy.discipline_of(field_code), len(staff), hits)


def field_stats(corpus: Corpus, ts: TopScientistSet, fields: Iterable[str] | None = None) -> list[FieldStats]:
    """Incidence for every field with staff (or the given subset), ordered by field code."""
    staff: dict[str, int] = {}
    hits: dict[str, int] = {}
    for r in corpus.roster:
        staff[r.field_code] = staff.get(r.field_code, 0) + 1
        if r.researcher_id in ts.members:
            hits[r.field_code] = hits.get(r.field_code, 0) + 1
    wanted = sorted(staff) if fields is None else sorted(set(fields))
    out = []
    for fcode in wanted:
        if fcode not in staff:
            raise DataValidationError(f"field {fcode} has no staff")
        out.append(FieldStats(fcode, corpus.taxonomy.discipline_of(fcode), staff[fcode], hits.get(fcode, 0)))
    return out


def rank_disciplines(rows: Iterable[tuple[str, int, int, int]]) -> list[DisciplineStats]:
    """Rank (code, field_count, staff, ts) rows by descending incidence.

    Ties on exact incidence fall back to larger staff, then discipline code.
    """
    rows = [r for r in rows]
    for code, _, staff, ts in rows:
        if staff < 1:
            raise DataValidationError(f"discipline {code} has no staff")
        if not 0 <= ts <= staff:
            raise DataValidationError(f"discipline {code}: ts_count outside [0, staff]")
    ordered = sorted(rows, key=lambda r: (-Fraction(r[3], r[2]), -r[2], r[0]))
    return [DisciplineStats(code, nf, staff, ts, i) for i, (code, nf, staff, ts) in enumerate(ordered, start=1)]


def discipline_rollup(corpus: Corpus, ts: TopScientistSet, fields: Iterable[str] | None = None) -> list[DisciplineStats]:
    """One row per discipline, summed over its fields (optionally restricted to ``fields``)."""
    agg: dict[str, list[int]] = {}
    for fs in field_stats(corpus, ts, fields):
        row = agg.setdefault(fs.discipline_code, [0, 0, 0])
        row[0] += 1
        row[1] += fs.staff_count
        row[2] += fs.ts_count
    return rank_disciplines((code, nf, st, t) for code, (nf, st, t) in agg.items())


def rollup_total(rows: Sequence[DisciplineStats]) -> tuple[int, int]:
    """(staff, ts) totals across disciplines."""
    return sum(r.staff_count for r in rows), sum(r.ts_count for r in rows)


def percentile_rank(fields: Sequence[FieldStats]) -> list[FieldStats]:
    """Order-based position of each field: 100 * (#fields strictly below) / (N - 1)."""
    n = len(fields)
    if n < 2:
        raise DataValidationError(f"percentile rank needs at least 2 fields, got {n}")
    values = sorted(f.incidence_exact for f in fields)
    out = []
    for f in fields:
        below = bisect.bisect_left(values, f.incidence_exact)
        out.append(replace(f, percentile_rank=(100 * below) / (n - 1)))
    return out


def _display_order(f: FieldStats):
    return (-f.incidence_exact, -f.staff_count, f.field_code)


def zero_ts_report(fields: Sequence[FieldStats], corpus: Corpus | None = None) -> list[FieldStats]:
    """Fields without any top scientist, largest staff first."""
    return sorted((f for f in fields if f.ts_count == 0), key=lambda f: (-f.staff_count, f.field_code))


def top_table(fields: Sequence[FieldStats], n: int) -> list[FieldStats]:
    """The ``n`` fields with highest incidence (ties: larger staff, then field code)."""
    if n < 1:
        raise InputError(f"n must be at least 1, got {n}")
    return sorted(fields, key=_display_order)[:n]


def _doubled_average_ranks(values: Sequence) -> list[int]:
    """Twice the 1-based average rank of each value (integers, ties share the mean)."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        doubled = (i + 1) + (j + 1)
        for k in range(i, j + 1):
            ranks[order[k]] = doubled
        i = j + 1
    return ranks


def rank_correlation(ranking_a, ranking_b) -> RankCorrelation:
    """Spearman's rho with average ranks for ties.

    Accepts two mappings keyed by field code (which must cover the same fields)
    or two equal-length sequences. Computed as Pearson correlation of the
    average ranks in integer arithmetic, so untied inputs reproduce
    1 - 6*sum(d^2) / (N(N^2 - 1)) exactly.
    """
    if isinstance(ranking_a, Mapping) or isinstance(ranking_b, Mapping):
        if not (isinstance(ranking_a, Mapping) and isinstance(ranking_b, Mapping)):
            raise InputError("both rankings must be mappings or both sequences")
        ka, kb = set(ranking_a), set(ranking_b)
        if ka != kb:
            diff = sorted(ka ^ kb)
            raise DataValidationError(f"rankings cover different fields: {', '.join(map(str, diff))}")
        keys = sorted(ka)
        a = [ranking_a[k] for k in keys]
        b = [ranking_b[k] for k in keys]
    else:
        a, b = list(ranking_a), list(ranking_b)
        if len(a) != len(b):
            raise DataValidationError(f"rankings differ in length: {len(a)} vs {len(b)}")
    n = len(a)
    if n < 2:
        raise DataValidationError(f"rank correlation needs at least 2 items, got {n}")
    x = _doubled_average_ranks(a)
    y = _doubled_average_ranks(b)
    sx, sy = sum(x), sum(y)
    sxy = n * sum(i * j for i, j in zip(x, y)) - sx * sy
    sxx = n * sum(i * i for i in x) - sx * sx
    syy = n * sum(j * j for j in y) - sy * sy
    if sxx == 0 or syy == 0:
        raise DataValidationError("rank correlation is undefined when one ranking is constant")
    prod = sxx * syy
    root = math.isqrt(prod)
    rho = sxy / root if root * root == prod else sxy / math.sqrt(prod)
    return RankCorrelation(max(-1.0, min(1.0, rho)), n)


def incidence_vector(fields: Iterable[FieldStats]) -> dict[str, Fraction]:
    return {f.field_code: f.incidence_exact for f in fields}


__all__ = [
    "DisciplineStats",
    "FieldStats",
    "RankCorrelation",
    "discipline_rollup",
    "eligible_fields",
    "field_eligibility",
    "field_stats",
    "format_pct",
    "incidence",
    "incidence_vector",
    "percentile_rank",
    "rank_correlation",
    "rank_disciplines",
    "rollup_total",
    "round_half_up",
    "top_table",
    "zero_ts_report",
]
