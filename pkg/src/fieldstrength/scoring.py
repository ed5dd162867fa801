"""Top-scientist identification under full and fractional counting."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping

import numpy as np
import polars as pl

from .corpus import Corpus
from .errors import InputError
from .hca import HcaSet, threshold_label

DEFAULT_THETA = 0.1


class CountingMode(str, Enum):
    FULL = "full"
    FRACTIONAL = "fractional"


@dataclass(frozen=True)
class FractionalOutput:
    researcher_id: str
    value: float


@dataclass(frozen=True)
class TopScientistSet:
    threshold_p: float
    mode: CountingMode
    members: frozenset[str]
    theta: float | None = None

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, researcher_id) -> bool:
        return researcher_id in self.members


def check_theta(theta: float) -> float:
    theta = float(theta)
    if not 0.0 < theta <= 1.0:
        raise InputError(f"theta must lie in (0, 1], got {theta}")
    return theta


def _as_fraction(x: float) -> Fraction:
    # "0.1" means one tenth, not the nearest binary double.
    return Fraction(repr(float(x)))


def _hca_mask(corpus: Corpus, hcas) -> np.ndarray:
    if isinstance(hcas, HcaSet):
        if len(hcas.mask) != corpus.n_publications:
            raise InputError("HCA set was computed on a different publication frame")
        return hcas.mask
    wanted = set(hcas)
    ids = corpus.publications["publication_id"].to_list()
    return np.fromiter((pid in wanted for pid in ids), dtype=bool, count=len(ids))


def hca_links(corpus: Corpus, hcas) -> pl.DataFrame:
    links = corpus.require_links()
    mask = pl.Series(_hca_mask(corpus, hcas))
    if links.height == 0:
        return links
    return links.filter(mask.gather(links["pub_idx"]))


def fractional_credits(corpus: Corpus, hcas) -> dict[str, Fraction]:
    """Exact summed 1/author_count_total over each researcher's HCA links."""
    sub = hca_links(corpus, hcas).sort("researcher_id", "pub_idx", "byline_index")
    out: dict[str, Fraction] = {}
    for rid, n in sub.select("researcher_id", "author_count_total").iter_rows():
        out[rid] = out.get(rid, Fraction(0)) + Fraction(1, n)
    return out


def fractional_output(researcher_id: str, corpus: Corpus, hcas) -> FractionalOutput:
    credit = fractional_credits(corpus, hcas).get(researcher_id, Fraction(0))
    return FractionalOutput(researcher_id, float(credit))


def top_scientists_full(corpus: Corpus, hcas) -> TopScientistSet:
    """Researchers with at least one HCA authorship."""
    members = frozenset(hca_links(corpus, hcas)["researcher_id"].unique().to_list())
    return TopScientistSet(_threshold_of(hcas), CountingMode.FULL, members)


def top_scientists_fractional(corpus: Corpus, hcas, theta: float = DEFAULT_THETA) -> TopScientistSet:
    """Researchers whose fractional HCA output is at least ``theta``."""
    theta = check_theta(theta)
    bound = _as_fraction(theta)
    members = frozenset(rid for rid, v in fractional_credits(corpus, hcas).items() if v >= bound)
    return TopScientistSet(_threshold_of(hcas), CountingMode.FRACTIONAL, members, theta)


def top_scientists(corpus: Corpus, hcas, mode: CountingMode | str, theta: float = DEFAULT_THETA) -> TopScientistSet:
    mode = CountingMode(mode)
    if mode is CountingMode.FULL:
        return top_scientists_full(corpus, hcas)
    return top_scientists_fractional(corpus, hcas, theta)


def _threshold_of(hcas) -> float:
    return float(getattr(hcas, "threshold_p", float("nan")))


def publication_credit(links: pl.DataFrame) -> dict[str, Fraction]:
    """Total credit handed out per publication: sum of 1/author_count_total over its links."""
    out: dict[str, Fraction] = {}
    for pid, n in links.select("publication_id", "author_count_total").iter_rows():
        out[pid] = out.get(pid, Fraction(0)) + Fraction(1, n)
    return out


def researcher_table(corpus: Corpus, hca_sets: Mapping[float, HcaSet], theta: float = DEFAULT_THETA) -> pl.DataFrame:
    """Per-researcher counts, fractional outputs and membership flags for every threshold."""
    links = corpus.require_links()
    ids = [r.researcher_id for r in corpus.roster]
    n_pubs = dict(links.group_by("researcher_id").agg(pl.col("pub_idx").n_unique()).iter_rows())
    columns: dict[str, list] = {
        "researcher_id": ids,
        "field_code": [r.field_code for r in corpus.roster],
        "n_publications": [int(n_pubs.get(i, 0)) for i in ids],
    }
    bound = _as_fraction(check_theta(theta))
    for p in sorted(hca_sets):
        sub = hca_links(corpus, hca_sets[p])
        counts = dict(sub.group_by("researcher_id").agg(pl.col("pub_idx").n_unique()).iter_rows())
        credits = fractional_credits(corpus, hca_sets[p])
        lbl = threshold_label(p)
        columns[f"hca_count_{lbl}"] = [int(counts.get(i, 0)) for i in ids]
        columns[f"fractional_output_{lbl}"] = [float(credits.get(i, 0)) for i in ids]
        columns[f"is_ts_full_{lbl}"] = [int(counts.get(i, 0) > 0) for i in ids]
        columns[f"is_ts_frac_{lbl}"] = [int(credits.get(i, Fraction(0)) >= bound) for i in ids]
    return pl.DataFrame(columns)


def ts_from_table(table: pl.DataFrame, threshold_p: float, mode: CountingMode | str, theta: float | None = None) -> TopScientistSet:
    """Rebuild a top-scientist set from a researcher dump (the ``rank`` stage input)."""
    mode = CountingMode(mode)
    col = f"is_ts_{'full' if mode is CountingMode.FULL else 'frac'}_{threshold_label(threshold_p)}"
    if col not in table.columns:
        raise InputError(f"researcher table lacks column {col}")
    members = frozenset(table.filter(pl.col(col) == 1)["researcher_id"].to_list())
    return TopScientistSet(float(threshold_p), mode, members, theta if mode is CountingMode.FRACTIONAL else None)

