"""Data model and validated ingestion of rosters, publications and the field taxonomy.

Publications and authorship links are held column-wise in polars frames so that
world-scale corpora (millions of rows) never materialize one Python object per
record. The dataclasses below are the record-level view of the same data.
"""

from __future__ import annotations

import csv
import inspect
import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Mapping, NamedTuple, Sequence

import polars as pl

from .errors import DataValidationError, InputError
from .rounding import format_pct

log = logging.getLogger(__name__)

ROSTER_HEADER = ("researcher_id", "surname", "given_names", "field_code", "institution_id", "tenure_years")
TAXONOMY_HEADER = ("field_code", "field_name", "discipline_code", "discipline_name")

PUBLICATION_SCHEMA = {
    "publication_id": pl.String,
    "year": pl.Int64,
    "categories": pl.List(pl.String),
    "citations": pl.Int64,
    "authors": pl.List(pl.String),
    "affiliations": pl.List(pl.String),
    "author_count_total": pl.Int64,
}

# pub_idx / researcher_idx are row positions into Corpus.publications / Corpus.roster.
LINK_SCHEMA = {
    "pub_idx": pl.Int64,
    "publication_id": pl.String,
    "byline_index": pl.Int64,
    "researcher_idx": pl.Int64,
    "researcher_id": pl.String,
    "author_count_total": pl.Int64,
}

# Keep list-explode semantics stable across polars releases that change the default.
EXPLODE_KW = {"empty_as_null": True} if "empty_as_null" in inspect.signature(pl.DataFrame.explode).parameters else {}

_JSONL_SCHEMA = {
    "id": pl.String,
    "year": pl.Int64,
    "categories": pl.List(pl.String),
    "citations": pl.Int64,
    "authors": pl.List(pl.String),
    "affiliations": pl.List(pl.String),
}


@dataclass(frozen=True)
class AnalysisWindow:
    start_year: int
    end_year: int
    min_tenure_years: int = 3

    def __post_init__(self):
        if self.start_year > self.end_year:
            raise InputError(f"window start {self.start_year} is after end {self.end_year}")
        if not 1 <= self.min_tenure_years <= self.length:
            raise InputError(
                f"min_tenure_years must lie in [1, {self.length}] for window "
                f"{self.start_year}:{self.end_year}, got {self.min_tenure_years}"
            )

    @property
    def length(self) -> int:
        return self.end_year - self.start_year + 1

    def __contains__(self, year: int) -> bool:
        return self.start_year <= year <= self.end_year

    @classmethod
    def parse(cls, text: str, min_tenure_years: int = 3) -> "AnalysisWindow":
        """Parse ``"2006:2010"``."""
        try:
            start, end = (int(part) for part in text.split(":"))
        except ValueError:
            raise InputError(f"window must look like START:END, got {text!r}") from None
        return cls(start, end, min_tenure_years)

    def __str__(self) -> str:
        return f"{self.start_year}:{self.end_year}"


@dataclass(frozen=True)
class Researcher:
    researcher_id: str
    surname: str
    given_name_tokens: tuple[str, ...]
    field_code: str
    discipline_code: str
    institution_id: str
    tenure_years_in_window: int


@dataclass(frozen=True)
class Publication:
    publication_id: str
    year: int
    subject_categories: tuple[str, ...]
    citation_count: int
    author_strings: tuple[str, ...]
    affiliation_strings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.subject_categories:
            raise DataValidationError(f"publication {self.publication_id} has no subject categories")
        if self.citation_count < 0:
            raise DataValidationError(f"publication {self.publication_id} has negative citation count")
        if not self.author_strings:
            raise DataValidationError(f"publication {self.publication_id} has no authors")

    @property
    def author_count_total(self) -> int:
        return len(self.author_strings)


@dataclass(frozen=True, order=True)
class AuthorshipLink:
    publication_id: str
    byline_index: int
    researcher_id: str
    author_count_total: int = 1


@dataclass(frozen=True)
class FieldTaxonomy:
    field_to_discipline: Mapping[str, str]
    field_names: Mapping[str, str] = field(default_factory=dict)
    discipline_names: Mapping[str, str] = field(default_factory=dict)

    def discipline_of(self, field_code: str) -> str:
        try:
            return self.field_to_discipline[field_code]
        except KeyError:
            raise DataValidationError(f"unknown field_code {field_code!r}") from None

    def __contains__(self, field_code: str) -> bool:
        return field_code in self.field_to_discipline

    def field_name(self, field_code: str) -> str:
        return self.field_names.get(field_code, field_code)

    def discipline_name(self, discipline_code: str) -> str:
        return self.discipline_names.get(discipline_code, discipline_code)

    def fields_of(self, discipline_code: str) -> list[str]:
        return sorted(f for f, d in self.field_to_discipline.items() if d == discipline_code)


class Loaded(NamedTuple):
    """Result of an ingestion step: the kept items and how many rows were filtered out."""

    items: object
    excluded: int


@dataclass(frozen=True)
class Corpus:
    window: AnalysisWindow
    roster: tuple[Researcher, ...]
    publications: pl.DataFrame
    taxonomy: FieldTaxonomy
    links: pl.DataFrame | None = None

    @cached_property
    def researcher_index(self) -> dict[str, int]:
        return {r.researcher_id: i for i, r in enumerate(self.roster)}

    @cached_property
    def publication_index(self) -> dict[str, int]:
        ids = self.publications["publication_id"].to_list()
        return {pid: i for i, pid in enumerate(ids)}

    @property
    def n_publications(self) -> int:
        return self.publications.height

    def with_links(self, links: pl.DataFrame) -> "Corpus":
        return replace(self, links=links)

    def require_links(self) -> pl.DataFrame:
        if self.links is None:
            raise DataValidationError("authorship links have not been resolved for this corpus")
        return self.links

    def iter_publications(self) -> Iterator[Publication]:
        for row in self.publications.iter_rows(named=True):
            yield Publication(
                row["publication_id"],
                row["year"],
                tuple(row["categories"]),
                row["citations"],
                tuple(row["authors"]),
                tuple(row["affiliations"] or ()),
            )

    def link_set(self) -> frozenset[AuthorshipLink]:
        return links_to_set(self.require_links())

    def staff_by_field(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for r in self.roster:
            counts[r.field_code] = counts.get(r.field_code, 0) + 1
        return counts


# --------------------------------------------------------------------------- taxonomy


def load_taxonomy(path) -> FieldTaxonomy:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"taxonomy file not found: {path}")
    mapping: dict[str, str] = {}
    fnames: dict[str, str] = {}
    dnames: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != TAXONOMY_HEADER:
            raise DataValidationError(f"expected header {','.join(TAXONOMY_HEADER)}", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4 or not row[0].strip() or not row[2].strip():
                raise DataValidationError("malformed taxonomy row", line=lineno, path=path)
            fcode, fname, dcode, dname = (c.strip() for c in row)
            if fcode in mapping and mapping[fcode] != dcode:
                raise DataValidationError(f"field {fcode} mapped to two disciplines", line=lineno, path=path)
            mapping[fcode] = dcode
            fnames[fcode] = fname or fcode
            dnames.setdefault(dcode, dname or dcode)
    return FieldTaxonomy(mapping, fnames, dnames)


def default_taxonomy() -> FieldTaxonomy:
    """The bundled Italian structure: 370 fields in 14 disciplines."""
    with resources.as_file(resources.files("fieldstrength") / "data" / "taxonomy_it.csv") as p:
        return load_taxonomy(p)


def write_taxonomy(taxonomy: FieldTaxonomy, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TAXONOMY_HEADER)
        for fcode in sorted(taxonomy.field_to_discipline):
            dcode = taxonomy.field_to_discipline[fcode]
            w.writerow([fcode, taxonomy.field_name(fcode), dcode, taxonomy.discipline_name(dcode)])


# --------------------------------------------------------------------------- roster


def load_roster(path, window: AnalysisWindow, taxonomy: FieldTaxonomy) -> Loaded:
    """Read a roster CSV and keep researchers meeting the tenure rule.

    Returns ``Loaded(items=tuple[Researcher], excluded=<rows below min tenure>)``.
    Duplicate ids and unknown field codes are rejected even on rows that the
    tenure filter would drop.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"roster file not found: {path}")
    kept: list[Researcher] = []
    seen: set[str] = set()
    excluded = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ROSTER_HEADER:
            raise DataValidationError(f"expected header {','.join(ROSTER_HEADER)}", line=1, path=path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(ROSTER_HEADER):
                raise DataValidationError(
                    f"expected {len(ROSTER_HEADER)} columns, found {len(row)}", line=lineno, path=path
                )
            rid, surname, given, fcode, inst, tenure_text = (c.strip() for c in row)
            if not rid or not surname:
                raise DataValidationError("empty researcher_id or surname", line=lineno, path=path)
            try:
                tenure = int(tenure_text)
            except ValueError:
                raise DataValidationError(f"tenure_years is not an integer: {tenure_text!r}", line=lineno, path=path) from None
            if tenure < 0:
                raise DataValidationError("tenure_years is negative", line=lineno, path=path)
            if rid in seen:
                raise DataValidationError(f"duplicate researcher_id {rid!r}", line=lineno, path=path)
            seen.add(rid)
            if fcode not in taxonomy:
                raise DataValidationError(f"unknown field_code {fcode!r}", line=lineno, path=path)
            if tenure < window.min_tenure_years:
                excluded += 1
                continue
            kept.append(
                Researcher(rid, surname, tuple(given.split()), fcode, taxonomy.discipline_of(fcode), inst, tenure)
            )
    if excluded:
        log.info("roster %s: %d researchers below %d years tenure excluded", path, excluded, window.min_tenure_years)
    return Loaded(tuple(kept), excluded)


def write_roster(roster: Iterable[Researcher], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROSTER_HEADER)
        for r in roster:
            w.writerow([r.researcher_id, r.surname, " ".join(r.given_name_tokens), r.field_code,
                        r.institution_id, r.tenure_years_in_window])


# --------------------------------------------------------------------------- publications


def publication_frame(publications: Iterable[Publication]) -> pl.DataFrame:
    """Column-wise frame for record-level publications (tests, small inputs)."""
    pubs = list(publications)
    frame = pl.DataFrame(
        {
            "publication_id": [p.publication_id for p in pubs],
            "year": [p.year for p in pubs],
            "categories": [list(dict.fromkeys(p.subject_categories)) for p in pubs],
            "citations": [p.citation_count for p in pubs],
            "authors": [list(p.author_strings) for p in pubs],
            "affiliations": [list(p.affiliation_strings) for p in pubs],
            "author_count_total": [p.author_count_total for p in pubs],
        },
        schema=PUBLICATION_SCHEMA,
    )
    _check_unique_ids(frame, None)
    return frame


def load_publications(path, window: AnalysisWindow) -> Loaded:
    """Read a publication JSON-lines file.

    Returns ``Loaded(items=pl.DataFrame, excluded=<out-of-window rows>)`` with the
    columns of ``PUBLICATION_SCHEMA``. Any invalid row aborts the load with its
    line number.
    """
    path = Path(path)
    if not path.is_file():
        raise InputError(f"publication file not found: {path}")
    if path.stat().st_size == 0:
        return Loaded(pl.DataFrame(schema=PUBLICATION_SCHEMA), 0)
    try:
        raw = pl.read_ndjson(path, schema=_JSONL_SCHEMA, ignore_errors=False)
    except Exception as exc:  # polars raises several error types for malformed input
        line, msg = _locate_bad_line(path)
        raise DataValidationError(msg or f"unreadable JSON lines ({exc})", line=line, path=path) from None

    checks = [
        (pl.col("id").is_null() | (pl.col("id") == ""), "missing id"),
        (pl.col("year").is_null(), "missing year"),
        (pl.col("citations").is_null(), "missing citations"),
        (pl.col("citations") < 0, "negative citation count"),
        (pl.col("categories").is_null() | (pl.col("categories").list.len() == 0), "empty categories"),
        (pl.col("authors").is_null() | (pl.col("authors").list.len() == 0), "empty authors"),
    ]
    flags = raw.select([expr.fill_null(False).alias(str(i)) for i, (expr, _) in enumerate(checks)])
    for i, (_, message) in enumerate(checks):
        hit = flags[str(i)].arg_true()
        if hit.len():
            raise DataValidationError(message, line=_line_of_record(path, hit[0]), path=path)

    frame = raw.select(
        pl.col("id").alias("publication_id"),
        pl.col("year"),
        pl.col("categories").list.unique(maintain_order=True),
        pl.col("citations"),
        pl.col("authors"),
        pl.col("affiliations").fill_null(pl.lit([], dtype=pl.List(pl.String))),
        pl.col("authors").list.len().cast(pl.Int64).alias("author_count_total"),
    )
    _check_unique_ids(frame, path)
    in_window = (pl.col("year") >= window.start_year) & (pl.col("year") <= window.end_year)
    kept = frame.filter(in_window)
    excluded = frame.height - kept.height
    if excluded:
        log.info("publications %s: %d rows outside window %s excluded", path, excluded, window)
    return Loaded(kept, excluded)


def write_publications(frame: pl.DataFrame, path) -> None:
    out = frame.select(
        pl.col("publication_id").alias("id"),
        "year",
        "categories",
        "citations",
        "authors",
        "affiliations",
    )
    out.write_ndjson(path)


def _check_unique_ids(frame: pl.DataFrame, path) -> None:
    dup = frame["publication_id"].is_duplicated()
    if dup.any():
        idx = dup.arg_true()[0]
        pid = frame["publication_id"][idx]
        line = _line_of_record(path, idx) if path is not None else None
        raise DataValidationError(f"duplicate publication id {pid!r}", line=line, path=path)


def _line_of_record(path: Path, record: int) -> int:
    """1-based file line holding the ``record``-th non-blank line."""
    seen = -1
    with path.open("rb") as fh:
        for lineno, line in enumerate(fh, start=1):
            if line.strip():
                seen += 1
                if seen == record:
                    return lineno
    return record + 1


_TYPES = {"id": str, "year": int, "citations": int}


def _locate_bad_line(path: Path) -> tuple[int | None, str | None]:
    with path.open(encoding="utf-8", errors="replace") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                return lineno, f"invalid JSON: {exc.msg}"
            if not isinstance(obj, dict):
                return lineno, "record is not a JSON object"
            for key, typ in _TYPES.items():
                val = obj.get(key)
                if val is None or isinstance(val, bool) or not isinstance(val, typ):
                    return lineno, f"key {key!r} missing or not a {typ.__name__}"
            for key in ("categories", "authors", "affiliations"):
                val = obj.get(key, [])
                if not isinstance(val, list) or not all(isinstance(v, str) for v in val):
                    return lineno, f"key {key!r} must be an array of strings"
    return None, None


# --------------------------------------------------------------------------- corpus


def build_corpus(
    window: AnalysisWindow,
    roster: Sequence[Researcher],
    publications: pl.DataFrame | Iterable[Publication],
    taxonomy: FieldTaxonomy,
    links: pl.DataFrame | None = None,
) -> Corpus:
    """Assemble a corpus, enforcing the window and tenure invariants."""
    if not isinstance(publications, pl.DataFrame):
        publications = publication_frame(publications)
    outside = publications.filter((pl.col("year") < window.start_year) | (pl.col("year") > window.end_year))
    if outside.height:
        raise DataValidationError(
            f"publication {outside['publication_id'][0]!r} lies outside window {window}"
        )
    seen: set[str] = set()
    for r in roster:
        if r.researcher_id in seen:
            raise DataValidationError(f"duplicate researcher_id {r.researcher_id!r}")
        seen.add(r.researcher_id)
        if r.tenure_years_in_window < window.min_tenure_years:
            raise DataValidationError(f"researcher {r.researcher_id!r} is below the tenure threshold")
        if taxonomy.discipline_of(r.field_code) != r.discipline_code:
            raise DataValidationError(f"researcher {r.researcher_id!r} has inconsistent discipline")
    return Corpus(window, tuple(roster), publications, taxonomy, links)


def load_corpus(roster_path, publications_path, taxonomy_path, window: AnalysisWindow) -> tuple[Corpus, dict]:
    taxonomy = load_taxonomy(taxonomy_path) if taxonomy_path is not None else default_taxonomy()
    roster = load_roster(roster_path, window, taxonomy)
    pubs = load_publications(publications_path, window)
    corpus = Corpus(window, roster.items, pubs.items, taxonomy)
    counts = {
        "researchers_kept": len(roster.items),
        "researchers_excluded_tenure": roster.excluded,
        "publications_kept": pubs.items.height,
        "publications_excluded_window": pubs.excluded,
    }
    return corpus, counts


def links_to_set(links: pl.DataFrame) -> frozenset[AuthorshipLink]:
    return frozenset(
        AuthorshipLink(pid, bi, rid, n)
        for pid, bi, rid, n in links.select(
            "publication_id", "byline_index", "researcher_id", "author_count_total"
        ).iter_rows()
    )


def links_from_set(links: Iterable[AuthorshipLink], corpus: Corpus) -> pl.DataFrame:
    """Frame form of record-level links, resolved against ``corpus`` indices."""
    rows = sorted(links)
    pidx = corpus.publication_index
    ridx = corpus.researcher_index
    return pl.DataFrame(
        {
            "pub_idx": [pidx[l.publication_id] for l in rows],
            "publication_id": [l.publication_id for l in rows],
            "byline_index": [l.byline_index for l in rows],
            "researcher_idx": [ridx[l.researcher_id] for l in rows],
            "researcher_id": [l.researcher_id for l in rows],
            "author_count_total": [l.author_count_total for l in rows],
        },
        schema=LINK_SCHEMA,
    )


def empty_links() -> pl.DataFrame:
    return pl.DataFrame(schema=LINK_SCHEMA)


def write_links(links: pl.DataFrame, path) -> None:
    links.select("publication_id", "byline_index", "researcher_id", "author_count_total").write_csv(path)


def read_links(path, corpus: Corpus) -> pl.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"links file not found: {path}")
    raw = pl.read_csv(
        path,
        schema={"publication_id": pl.String, "byline_index": pl.Int64, "researcher_id": pl.String,
                "author_count_total": pl.Int64},
    )
    pidx = corpus.publication_index
    ridx = corpus.researcher_index
    keep = [
        i for i, (p, r) in enumerate(zip(raw["publication_id"].to_list(), raw["researcher_id"].to_list()))
        if p in pidx and r in ridx
    ]
    raw = raw[keep]
    return raw.select(
        pl.col("publication_id").replace_strict(pidx, return_dtype=pl.Int64).alias("pub_idx"),
        "publication_id",
        "byline_index",
        pl.col("researcher_id").replace_strict(ridx, return_dtype=pl.Int64).alias("researcher_idx"),
        "researcher_id",
        "author_count_total",
    ).sort("pub_idx", "byline_index")


# --------------------------------------------------------------------------- summary


@dataclass(frozen=True)
class SummaryRow:
    discipline_code: str
    discipline_name: str
    n_fields: int
    staff: int
    publications: int
    hca_counts: Mapping[float, int]

    def hca_share(self, threshold_p: float) -> float | None:
        if self.publications == 0:
            return None
        return self.hca_counts[threshold_p] / self.publications

    def hca_cell(self, threshold_p: float) -> str:
        count = self.hca_counts[threshold_p]
        if self.publications == 0:
            return f"{count}"
        return f"{count} ({format_pct(count, self.publications)}%)"


@dataclass(frozen=True)
class SummaryReport:
    thresholds: tuple[float, ...]
    rows: tuple[SummaryRow, ...]
    total: SummaryRow


def corpus_summary(corpus: Corpus, hca_sets: Mapping[float, object] | None = None,
                   fields: Iterable[str] | None = None) -> SummaryReport:
    """Per-discipline dataset description.

    A publication co-authored by researchers of two disciplines is counted once
    in each discipline row but once in the total row. ``hca_sets`` maps a
    threshold to anything exposing a boolean ``mask`` aligned with the corpus
    publications (see ``hca.HcaSet``). ``fields`` restricts the staff considered.
    """
    hca_sets = dict(hca_sets or {})
    thresholds = tuple(sorted(hca_sets))
    keep = set(fields) if fields is not None else None
    roster_mask = [keep is None or r.field_code in keep for r in corpus.roster]

    staff: dict[str, int] = {}
    field_sets: dict[str, set[str]] = {}
    for r, ok in zip(corpus.roster, roster_mask):
        if ok:
            staff[r.discipline_code] = staff.get(r.discipline_code, 0) + 1
            field_sets.setdefault(r.discipline_code, set()).add(r.field_code)

    links = corpus.links if corpus.links is not None else empty_links()
    researchers = pl.DataFrame(
        {
            "researcher_idx": list(range(len(corpus.roster))),
            "discipline": [r.discipline_code for r in corpus.roster],
            "ok": roster_mask,
        },
        schema={"researcher_idx": pl.Int64, "discipline": pl.String, "ok": pl.Boolean},
    )
    pairs = (
        links.select("pub_idx", "researcher_idx")
        .join(researchers, on="researcher_idx")
        .filter(pl.col("ok"))
        .select("pub_idx", "discipline")
        .unique()
        .sort("pub_idx", "discipline")
    )
    for p, h in hca_sets.items():
        pairs = pairs.with_columns(pl.Series(h.mask).gather(pairs["pub_idx"]).alias(f"h{p}"))

    def _row(code: str, name: str, sub: pl.DataFrame, nf: int, st: int) -> SummaryRow:
        counts = {p: int(sub[f"h{p}"].sum()) if sub.height else 0 for p in thresholds}
        return SummaryRow(code, name, nf, st, sub.height, counts)

    rows = []
    for code in sorted(staff):
        sub = pairs.filter(pl.col("discipline") == code)
        rows.append(_row(code, corpus.taxonomy.discipline_name(code), sub, len(field_sets[code]), staff[code]))
    distinct = pairs.unique(subset="pub_idx") if pairs.height else pairs
    total = _row("TOTAL", "Total", distinct, sum(len(v) for v in field_sets.values()), sum(staff.values()))
    return SummaryReport(thresholds, tuple(rows), total)
