"""World citation percentiles per (year, subject category) and highly-cited labels.

A publication's percentile in a stratum is the share of stratum members that
strictly out-cite it, so tied publications share a percentile and the top
publication sits at 0. Across categories the most favorable (smallest)
percentile counts.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Mapping

import numpy as np
import polars as pl

from .corpus import EXPLODE_KW, Corpus, Publication, publication_frame
from .errors import DataValidationError, InputError

log = logging.getLogger(__name__)

DEFAULT_THRESHOLDS = (1.0, 5.0)


def check_threshold(threshold_p: float) -> float:
    threshold_p = float(threshold_p)
    if not 0.0 < threshold_p < 100.0:
        raise InputError(f"threshold must lie in (0, 100), got {threshold_p}")
    return threshold_p


def threshold_label(threshold_p: float) -> str:
    """1.0 -> "1", 2.5 -> "2.5"."""
    return f"{threshold_p:g}"


@dataclass(frozen=True)
class Stratum:
    year: int
    category: str
    member_publication_ids: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.member_publication_ids)


def build_strata(publications: Iterable[Publication]) -> list[Stratum]:
    """One stratum per (year, category) present, ordered by year then category."""
    members: dict[tuple[int, str], list[str]] = {}
    for pub in publications:
        for cat in dict.fromkeys(pub.subject_categories):
            members.setdefault((pub.year, cat), []).append(pub.publication_id)
    return [Stratum(y, c, tuple(ids)) for (y, c), ids in sorted(members.items())]


def stratum_percentiles(stratum: Stratum, citations: Mapping[str, int]) -> dict[str, float]:
    """Percentile of each member: 100 * (#members with strictly more citations) / size."""
    ids = stratum.member_publication_ids
    counts = np.array([citations[i] for i in ids], dtype=np.int64)
    ordered = np.sort(counts)
    superiors = len(ordered) - np.searchsorted(ordered, counts, side="right")
    return {pid: (100 * int(k)) / len(ids) for pid, k in zip(ids, superiors)}


@dataclass(frozen=True)
class PercentileRecord:
    publication_id: str
    per_category_percentile: Mapping[str, float]

    @property
    def effective_percentile(self) -> float:
        return min(self.per_category_percentile.values())


@dataclass(frozen=True)
class HcaLabel:
    publication_id: str
    threshold_p: float
    is_hca: bool


def strata_index(publications: Iterable[Publication]) -> dict[tuple[int, str], dict[str, float]]:
    pubs = list(publications)
    citations = {p.publication_id: p.citation_count for p in pubs}
    return {(s.year, s.category): stratum_percentiles(s, citations) for s in build_strata(pubs)}


def effective_percentile(pub: Publication, index: Mapping[tuple[int, str], Mapping[str, float]]) -> PercentileRecord:
    per_cat = {}
    for cat in pub.subject_categories:
        try:
            per_cat[cat] = index[(pub.year, cat)][pub.publication_id]
        except KeyError:
            raise DataValidationError(
                f"no stratum ({pub.year}, {cat}) holding publication {pub.publication_id}"
            ) from None
    return PercentileRecord(pub.publication_id, per_cat)


@dataclass(frozen=True)
class HcaSet:
    """Highly-cited publications at one threshold.

    ``mask`` is aligned with the rows of the publication frame it was computed
    from; set operations go through the publication ids.
    """

    threshold_p: float
    mask: np.ndarray
    publication_ids: pl.Series

    @cached_property
    def ids(self) -> frozenset[str]:
        return frozenset(self.publication_ids.filter(pl.Series(self.mask)).to_list())

    def __contains__(self, publication_id) -> bool:
        return publication_id in self.ids

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.ids))

    def issubset(self, other: "HcaSet") -> bool:
        return bool(np.all(~self.mask | other.mask))

    def labels(self) -> Iterator[HcaLabel]:
        for pid, flag in zip(self.publication_ids.to_list(), self.mask.tolist()):
            yield HcaLabel(pid, self.threshold_p, bool(flag))


class PercentileTable:
    """Stratum percentiles for every (publication, category) membership of a frame."""

    def __init__(self, publications: pl.DataFrame):
        self.publication_ids = publications["publication_id"]
        n = publications.height
        m = (
            publications.select("year", "categories", "citations")
            .with_row_index("pub_idx")
            .with_columns(pl.col("pub_idx").cast(pl.Int64))
            .explode("categories", **EXPLODE_KW)
            .rename({"categories": "category"})
        )
        group = ["year", "category"]
        m = m.with_columns(
            (pl.col("citations").rank("min", descending=True).over(group).cast(pl.Int64) - 1).alias("superiors"),
            pl.len().over(group).cast(pl.Int64).alias("stratum_size"),
        ).with_columns(
            ((pl.col("superiors") * 100).cast(pl.Float64) / pl.col("stratum_size").cast(pl.Float64)).alias("percentile")
        )
        self.memberships = m
        eff = np.full(n, np.inf)
        if m.height:
            np.minimum.at(eff, m["pub_idx"].to_numpy(), m["percentile"].to_numpy())
        self.effective = eff

    @classmethod
    def from_publications(cls, publications) -> "PercentileTable":
        if isinstance(publications, Corpus):
            return cls(publications.publications)
        if isinstance(publications, pl.DataFrame):
            return cls(publications)
        return cls(publication_frame(publications))

    def hca(self, threshold_p: float) -> HcaSet:
        threshold_p = check_threshold(threshold_p)
        return HcaSet(threshold_p, self.effective < threshold_p, self.publication_ids)

    def record(self, pub_idx: int) -> PercentileRecord:
        rows = self.memberships.filter(pl.col("pub_idx") == pub_idx)
        return PercentileRecord(
            self.publication_ids[pub_idx], dict(zip(rows["category"].to_list(), rows["percentile"].to_list()))
        )

    def degenerate_strata(self) -> pl.DataFrame:
        """Strata in which every member has the same citation count (all are HCAs)."""
        return (
            self.memberships.group_by("year", "category")
            .agg(pl.col("citations").n_unique().alias("distinct"), pl.len().alias("size"))
            .filter(pl.col("distinct") == 1)
            .select("year", "category", "size")
            .sort("year", "category")
        )

    def dump(self, thresholds: Iterable[float]) -> pl.DataFrame:
        """Per-membership rows for the optional percentile CSV."""
        eff = pl.Series("effective_percentile", self.effective)
        out = self.memberships.with_columns(
            self.publication_ids.gather(self.memberships["pub_idx"]).alias("publication_id"),
            eff.gather(self.memberships["pub_idx"]).alias("effective_percentile"),
        )
        flags = [
            (pl.col("effective_percentile") < p).cast(pl.Int8).alias(f"is_hca_{threshold_label(p)}")
            for p in sorted(thresholds)
        ]
        return out.with_columns(flags).select(
            "publication_id", "category", "year", "citations", "percentile", "effective_percentile",
            *[f"is_hca_{threshold_label(p)}" for p in sorted(thresholds)],
        ).sort("publication_id", "category")


def hca_set(corpus, threshold_p: float, table: PercentileTable | None = None) -> HcaSet:
    """Publications whose effective world percentile is below ``threshold_p``."""
    threshold_p = check_threshold(threshold_p)
    if table is None:
        table = PercentileTable.from_publications(corpus)
    return table.hca(threshold_p)
