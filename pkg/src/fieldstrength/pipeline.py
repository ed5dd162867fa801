"""End-to-end analysis runs and the report bundle they write.

A run goes ingest -> disambiguate -> percentiles -> HCA sets -> top-scientist
sets -> field and discipline analytics, checks the nesting invariants, and
writes every table plus a provenance record. While a run is writing, the output
directory carries a ``.partial`` marker that is removed only on success.
"""

from __future__ import annotations

import hashlib
import json
import logging
from contextlib import contextmanager
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import polars as pl

from . import __version__
from .analytics import (
    DEFAULT_TAU,
    FieldStats,
    discipline_rollup,
    eligible_fields,
    field_stats,
    incidence_vector,
    percentile_rank,
    rank_correlation,
    top_table,
    zero_ts_report,
)
from .corpus import AnalysisWindow, Corpus, corpus_summary, load_corpus, read_links, write_links
from .disambig import filter_links, candidate_map
from .errors import DataValidationError, FieldStrengthError, InputError, InvariantViolation
from .hca import DEFAULT_THRESHOLDS, HcaSet, PercentileTable, check_threshold, threshold_label
from .reports import (
    Table,
    check_format,
    correlation_table,
    discipline_table,
    field_table,
    summary_table,
    top_fields_table,
    write_table,
    zero_ts_table,
)
from .scoring import DEFAULT_THETA, CountingMode, TopScientistSet, check_theta, researcher_table, top_scientists

log = logging.getLogger(__name__)

PARTIAL_MARKER = ".partial"
MODES = ("full", "fractional", "both")


def canonical_thresholds(values: Iterable[float]) -> tuple[float, ...]:
    out = tuple(sorted({check_threshold(v) for v in values}))
    if not out:
        raise InputError("at least one threshold is required")
    return out


def parse_thresholds(text: str) -> tuple[float, ...]:
    """"1,5" -> (1.0, 5.0); order and duplicates are irrelevant."""
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise InputError(f"thresholds must be comma-separated numbers, got {text!r}") from None
    return canonical_thresholds(values)


def modes_of(mode: str) -> tuple[CountingMode, ...]:
    if mode not in MODES:
        raise InputError(f"unknown counting mode {mode!r}; valid modes: {', '.join(MODES)}")
    if mode == "both":
        return (CountingMode.FULL, CountingMode.FRACTIONAL)
    return (CountingMode(mode),)


@dataclass(frozen=True)
class RunConfig:
    roster: Path
    publications: Path
    out_dir: Path
    taxonomy: Path | None = None
    links: Path | None = None  # pre-resolved links; skips disambiguation when given
    window: AnalysisWindow = AnalysisWindow(2006, 2010, 3)
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    mode: str = "both"
    theta: float = DEFAULT_THETA
    tau: float = DEFAULT_TAU
    fmt: str = "csv"
    top_n: int = 20
    write_percentiles: bool = False

    def __post_init__(self):
        object.__setattr__(self, "thresholds", canonical_thresholds(self.thresholds))
        modes_of(self.mode)
        check_theta(self.theta)
        check_format(self.fmt)
        if not 0.0 <= self.tau <= 1.0:
            raise InputError(f"tau must lie in [0, 1], got {self.tau}")
        if self.top_n < 1:
            raise InputError("top_n must be at least 1")
        for name in ("roster", "publications", "taxonomy", "links"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise InputError(f"{name} file not found: {path}")

    def parameters(self) -> dict:
        return {
            "window": str(self.window),
            "min_tenure_years": self.window.min_tenure_years,
            "thresholds": [threshold_label(p) for p in self.thresholds],
            "mode": self.mode,
            "theta": self.theta,
            "tau": self.tau,
            "format": self.fmt,
            "top_n": self.top_n,
            "write_percentiles": self.write_percentiles,
            "links_supplied": self.links is not None,
        }


@dataclass
class RunResult:
    tables: dict[str, Table] = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    field_stats: dict[tuple[str, float], list[FieldStats]] = field(default_factory=dict)
    ts_sets: dict[tuple[str, float], TopScientistSet] = field(default_factory=dict)
    files: list[Path] = field(default_factory=list)


@contextmanager
def stage(name: str):
    """Prefix errors raised inside a stage with the stage name."""
    try:
        yield
    except FieldStrengthError as exc:
        exc.args = (f"stage {name}: {exc}",)
        raise


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n"


# ----------------------------------------------------------------------------- analysis core


def table_key(mode: CountingMode | str, p: float) -> str:
    return f"{CountingMode(mode).value}_{threshold_label(p)}"


def analyze(corpus: Corpus, ts_sets: Mapping[tuple[str, float], TopScientistSet], eligible: frozenset[str],
            top_n: int, result: RunResult) -> None:
    """Field and discipline tables for every (mode, threshold) TS set, plus correlations."""
    fields_sorted = sorted(eligible)
    vectors: dict[tuple[str, float], dict] = {}
    for (mode, p), ts in sorted(ts_sets.items()):
        key = table_key(mode, p)
        stats = field_stats(corpus, ts, fields_sorted) if fields_sorted else []
        if len(stats) >= 2:
            stats = percentile_rank(stats)
        else:
            log.warning("percentile ranks need at least 2 eligible fields; %d available", len(stats))
        result.field_stats[(mode, p)] = stats
        vectors[(mode, p)] = incidence_vector(stats)
        tax = corpus.taxonomy
        result.tables[f"fields_{key}"] = field_table(f"fields_{key}", stats, tax)
        result.tables[f"disciplines_{key}"] = discipline_table(
            f"disciplines_{key}", discipline_rollup(corpus, ts, fields_sorted) if fields_sorted else [], tax
        )
        result.tables[f"zero_ts_{key}"] = zero_ts_table(f"zero_ts_{key}", zero_ts_report(stats), tax)
        result.tables[f"top_{key}"] = top_fields_table(f"top_{key}", top_table(stats, top_n) if stats else [], tax)

    entries = []
    keys = sorted(vectors)
    for a, b in combinations(keys, 2):
        if a[0] != b[0] and a[1] != b[1]:
            continue
        try:
            rc = rank_correlation(vectors[a], vectors[b])
            entries.append((table_key(*a), table_key(*b), rc.n, rc.rho))
        except DataValidationError as exc:
            log.warning("no rank correlation for %s vs %s: %s", table_key(*a), table_key(*b), exc)
            entries.append((table_key(*a), table_key(*b), len(vectors[a]), None))
    result.tables["correlations"] = correlation_table("correlations", entries)


def self_check(corpus: Corpus, hca_sets: Mapping[float, HcaSet], ts_sets: Mapping[tuple[str, float], TopScientistSet],
               field_rows: Mapping[tuple[str, float], Sequence[FieldStats]], eligible: frozenset[str]) -> None:
    """Nesting and bookkeeping invariants that every run must satisfy."""
    ps = sorted(hca_sets)
    for lo, hi in zip(ps, ps[1:]):
        if not hca_sets[lo].issubset(hca_sets[hi]):
            raise InvariantViolation(f"HCA set at {lo:g}% is not contained in the set at {hi:g}%")
        for mode in {m for m, _ in ts_sets}:
            if (mode, lo) in ts_sets and not ts_sets[(mode, lo)].members <= ts_sets[(mode, hi)].members:
                raise InvariantViolation(f"{mode} top scientists at {lo:g}% are not contained in those at {hi:g}%")
    for p in ps:
        full, frac = ts_sets.get((CountingMode.FULL, p)), ts_sets.get((CountingMode.FRACTIONAL, p))
        if full is not None and frac is not None and not frac.members <= full.members:
            raise InvariantViolation(f"fractional top scientists at {p:g}% are not all full-count top scientists")
    links = corpus.require_links()
    if links.height and links.select("pub_idx", "byline_index").is_duplicated().any():
        raise InvariantViolation("a byline is linked to more than one researcher")
    field_of = {r.researcher_id: r.field_code for r in corpus.roster}
    for key, rows in field_rows.items():
        expected = sum(1 for rid in ts_sets[key].members if field_of.get(rid) in eligible)
        if sum(f.ts_count for f in rows) != expected:
            raise InvariantViolation(f"field totals for {table_key(*key)} do not add up to the top-scientist count")


def run_analysis(corpus: Corpus, config: RunConfig) -> tuple[RunResult, PercentileTable, dict[float, HcaSet]]:
    """Everything after disambiguation. ``corpus`` must carry links."""
    result = RunResult()
    with stage("hca"):
        table = PercentileTable(corpus.publications)
        hca_sets = {p: table.hca(p) for p in config.thresholds}
        degenerate = table.degenerate_strata()
        result.diagnostics["hca"] = {
            "strata": int(table.memberships.select("year", "category").n_unique()) if table.memberships.height else 0,
            "degenerate_strata": degenerate.height,
            **{f"hca_{threshold_label(p)}": len(h) for p, h in hca_sets.items()},
        }
        if degenerate.height:
            log.warning("%d strata have a single citation value; all their members are HCAs", degenerate.height)
    with stage("topsci"):
        for mode in modes_of(config.mode):
            for p in config.thresholds:
                result.ts_sets[(mode, p)] = top_scientists(corpus, hca_sets[p], mode, config.theta)
        result.diagnostics["top_scientists"] = {table_key(*k): len(v) for k, v in sorted(result.ts_sets.items())}
    with stage("rank"):
        active = set(corpus.require_links()["researcher_id"].unique().to_list())
        eligible = eligible_fields(corpus.roster, active, config.tau)
        staffed = {r.field_code for r in corpus.roster}
        result.diagnostics["fields"] = {"staffed": len(staffed), "eligible": len(eligible),
                                        "ineligible": sorted(staffed - eligible)}
        summary = corpus_summary(corpus, hca_sets, eligible)
        result.tables["summary"] = summary_table("summary", summary)
        analyze(corpus, result.ts_sets, eligible, config.top_n, result)
    with stage("self-check"):
        self_check(corpus, hca_sets, result.ts_sets, result.field_stats, eligible)
    return result, table, hca_sets


def run_pipeline(config: RunConfig) -> RunResult:
    """Run every stage and write the report bundle into ``config.out_dir``."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    marker = out / PARTIAL_MARKER
    marker.write_text("incomplete run\n", encoding="utf-8")

    with stage("ingest"):
        corpus, counts = load_corpus(config.roster, config.publications, config.taxonomy, config.window)
    with stage("disambiguate"):
        if config.links is not None:
            links = read_links(config.links, corpus)
            disambig = {"links": links.height, "source": "supplied"}
        else:
            result_links = filter_links(candidate_map(corpus.roster, corpus.publications), corpus)
            links = result_links.links
            disambig = {"bylines_total": int(corpus.publications["author_count_total"].sum() or 0),
                        **result_links.diagnostics}
        corpus = corpus.with_links(links)

    result, table, hca_sets = run_analysis(corpus, config)
    result.diagnostics = {"ingest": counts, "disambiguation": disambig, **result.diagnostics}

    with stage("write"):
        files = []
        for name in sorted(result.tables):
            files.append(write_table(result.tables[name], out, config.fmt))
        researchers = researcher_table(corpus, hca_sets, config.theta)
        files.append(out / "researchers.csv")
        researchers.write_csv(files[-1], float_precision=12)
        files.append(out / "links.csv")
        write_links(links, files[-1])
        if config.write_percentiles:
            files.append(out / "percentiles.csv")
            table.dump(config.thresholds).write_csv(files[-1], float_precision=12)
        files.append(out / "diagnostics.json")
        files[-1].write_text(dumps(result.diagnostics), encoding="utf-8")
        provenance = build_provenance(config, files)
        (out / "provenance.json").write_text(dumps(provenance), encoding="utf-8")
        files.append(out / "provenance.json")
        result.files = files
    marker.unlink()
    return result


def build_provenance(config: RunConfig, outputs: Sequence[Path]) -> dict:
    """Parameters plus content digests of inputs and outputs. No paths, no clock."""
    inputs = {}
    for name in ("roster", "publications", "taxonomy", "links"):
        path = getattr(config, name)
        if path is not None:
            inputs[name] = {"file": Path(path).name, "sha256": sha256_file(path)}
    if config.taxonomy is None:
        inputs["taxonomy"] = {"file": "<bundled>", "sha256": _bundled_taxonomy_digest()}
    return {
        "tool": "fieldstrength",
        "version": __version__,
        "parameters": config.parameters(),
        "inputs": inputs,
        "outputs": {p.name: sha256_file(p) for p in sorted(outputs, key=lambda p: p.name)},
    }


def _bundled_taxonomy_digest() -> str:
    from importlib import resources

    data = resources.files("fieldstrength").joinpath("data/taxonomy_it.csv").read_bytes()
    return hashlib.sha256(data).hexdigest()


def read_field_table(path) -> dict[str, FieldStats]:
    """Field rows (code, discipline, staff, ts) from a fields CSV written by a run."""
    path = Path(path)
    if not path.is_file():
        raise InputError(f"field table not found: {path}")
    try:
        frame = pl.read_csv(path, schema_overrides={"field_code": pl.String, "discipline_code": pl.String,
                                                    "staff": pl.Int64, "ts": pl.Int64})
    except (pl.exceptions.PolarsError, OSError) as exc:
        raise DataValidationError(f"cannot read field table: {exc}", path=path) from None
    missing = {"field_code", "discipline_code", "staff", "ts"} - set(frame.columns)
    if missing:
        raise DataValidationError(f"field table lacks columns {', '.join(sorted(missing))}", path=path)
    return {
        code: FieldStats(code, disc, staff, ts)
        for code, disc, staff, ts in frame.select("field_code", "discipline_code", "staff", "ts").iter_rows()
    }
