"""Resolve raw byline names to roster identities.

Three stages: build a roster name index, map every byline to all compatible
roster identities, then filter ambiguous bylines with affiliation and
subject-category evidence, dropping any byline that remains tied.
"""

from __future__ import annotations

import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import polars as pl

from .corpus import (
    EXPLODE_KW,
    LINK_SCHEMA,
    AuthorshipLink,
    Corpus,
    Researcher,
    links_to_set,
    publication_frame,
)

_EXTRA_FOLDS = str.maketrans({"ø": "o", "ł": "l", "đ": "d", "æ": "ae", "œ": "oe", "ı": "i", "ð": "d", "þ": "th"})
_NON_ALNUM = re.compile(r"[^0-9a-z]+")


def fold(text: str) -> str:
    """Case-fold and strip diacritics."""
    text = unicodedata.normalize("NFKD", text.casefold())
    text = "".join(ch for ch in text if not unicodedata.combining(ch))
    return text.translate(_EXTRA_FOLDS)


def name_tokens(text: str) -> list[str]:
    return _NON_ALNUM.sub(" ", fold(text)).split()


def surname_keys(surname: str) -> tuple[str, set[str]]:
    """Concatenated form and the set of keys a surname answers to.

    Multi-token and hyphenated surnames answer to their concatenation and to
    each token of three or more letters (particles such as "de" are skipped).
    """
    tokens = name_tokens(surname)
    concat = "".join(tokens)
    keys = {concat}
    if len(tokens) > 1:
        keys.update(t for t in tokens if len(t) >= 3)
    keys.discard("")
    return concat, keys


def _is_initials(token: str) -> bool:
    letters = token.replace(".", "").replace("-", "")
    return bool(letters) and letters.isalpha() and letters.isupper() and (len(letters) <= 3 or "." in token)


def parse_byline(raw: str) -> tuple[str, str]:
    """Split a byline into (surname, given) parts.

    Handles "Rossi, Mario", "Rossi, M.", "Rossi M.", "Rossi MA", "M. Rossi" and
    "Mario Rossi".
    """
    raw = raw.strip()
    if "," in raw:
        surname, given = raw.split(",", 1)
        return surname.strip(), given.strip()
    tokens = raw.split()
    if len(tokens) <= 1:
        return raw, ""
    k = len(tokens)
    while k > 1 and _is_initials(tokens[k - 1]):
        k -= 1
    if k < len(tokens):
        return " ".join(tokens[:k]), " ".join(tokens[k:])
    j = 0
    while j < len(tokens) - 1 and _is_initials(tokens[j]):
        j += 1
    if j > 0:
        return " ".join(tokens[j:]), " ".join(tokens[:j])
    return tokens[-1], " ".join(tokens[:-1])


def initials(given: str | Sequence[str]) -> str:
    """Folded initials of a given-name string or token list ("Jean-Pierre M." -> "jpm")."""
    tokens = given.split() if isinstance(given, str) else list(given)
    out = []
    for tok in tokens:
        if _is_initials(tok):
            out.extend(ch for ch in tok if ch.isalpha())
        else:
            out.extend(part[0] for part in re.split(r"[-.]", tok) if part)
    return fold("".join(out))


@dataclass
class RosterNameIndex:
    roster: Sequence[Researcher]
    by_key: dict[str, list[int]] = field(default_factory=dict)
    by_concat: dict[str, list[int]] = field(default_factory=dict)
    initials: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, roster: Sequence[Researcher]) -> "RosterNameIndex":
        idx = cls(roster)
        by_key: dict[str, list[int]] = defaultdict(list)
        by_concat: dict[str, list[int]] = defaultdict(list)
        for i, r in enumerate(roster):
            concat, keys = surname_keys(r.surname)
            by_concat[concat].append(i)
            for key in sorted(keys):
                by_key[key].append(i)
            idx.initials.append(initials(r.given_name_tokens))
        idx.by_key = dict(by_key)
        idx.by_concat = dict(by_concat)
        return idx

    def surname_matches(self, byline_surname: str) -> list[int]:
        concat, keys = surname_keys(byline_surname)
        found = set(self.by_key.get(concat, ()))
        for key in keys:
            found.update(self.by_concat.get(key, ()))
        return sorted(found)


def _as_frame(publications) -> pl.DataFrame:
    if isinstance(publications, pl.DataFrame):
        return publications
    if isinstance(publications, Corpus):
        return publications.publications
    return publication_frame(publications)


def bylines(publications: pl.DataFrame) -> pl.DataFrame:
    """One row per (publication, byline position)."""
    return (
        publications.select("publication_id", "authors", "author_count_total")
        .with_row_index("pub_idx")
        .with_columns(
            pl.col("pub_idx").cast(pl.Int64),
            pl.int_ranges(0, pl.col("authors").list.len(), dtype=pl.Int64).alias("byline_index"),
        )
        .explode("authors", "byline_index", **EXPLODE_KW)
        .rename({"authors": "raw"})
    )


def candidate_map(roster: Sequence[Researcher], publications) -> pl.DataFrame:
    """Every (byline, researcher) pair whose surname and initials are compatible.

    A byline may map to several researchers here; ``filter_links`` settles them.
    Returns a frame with the ``LINK_SCHEMA`` columns.
    """
    pubs = _as_frame(publications)
    index = RosterNameIndex.build(roster)
    if pubs.height == 0 or not roster:
        return pl.DataFrame(schema=LINK_SCHEMA)
    rows = bylines(pubs)

    has_comma = pl.col("raw").str.contains(",", literal=True)
    split = pl.col("raw").str.splitn(",", 2)
    rows = rows.with_columns(
        pl.when(has_comma).then(split.struct.field("field_0").str.strip_chars()).otherwise(None).alias("surname_raw"),
        pl.when(has_comma).then(split.struct.field("field_1").str.strip_chars()).otherwise(None).alias("given_raw"),
    )
    plain = rows.filter(pl.col("surname_raw").is_null())["raw"].unique()
    if plain.len():
        parsed = [parse_byline(s) for s in plain.to_list()]
        lookup = pl.DataFrame(
            {"raw": plain, "s_p": [p[0] for p in parsed], "g_p": [p[1] for p in parsed]},
            schema={"raw": pl.String, "s_p": pl.String, "g_p": pl.String},
        )
        rows = rows.join(lookup, on="raw", how="left").with_columns(
            pl.coalesce("surname_raw", "s_p").alias("surname_raw"),
            pl.coalesce("given_raw", "g_p").alias("given_raw"),
        ).drop("s_p", "g_p")

    surnames = rows["surname_raw"].unique().to_list()
    matched = [(s, m) for s in surnames for m in [index.surname_matches(s)] if m]
    if not matched:
        return pl.DataFrame(schema=LINK_SCHEMA)
    surname_map = pl.DataFrame(
        {"surname_raw": [s for s, _ in matched], "researcher_idx": [m for _, m in matched]},
        schema={"surname_raw": pl.String, "researcher_idx": pl.List(pl.Int64)},
    )
    rows = rows.join(surname_map, on="surname_raw", how="inner").explode("researcher_idx", **EXPLODE_KW)

    givens = rows["given_raw"].unique().to_list()
    given_map = pl.DataFrame(
        {"given_raw": givens, "b_init": [initials(g or "") for g in givens]},
        schema={"given_raw": pl.String, "b_init": pl.String},
    )
    researchers = pl.DataFrame(
        {
            "researcher_idx": list(range(len(roster))),
            "r_init": index.initials,
            "researcher_id": [r.researcher_id for r in roster],
        },
        schema={"researcher_idx": pl.Int64, "r_init": pl.String, "researcher_id": pl.String},
    )
    rows = rows.join(given_map, on="given_raw", how="left").join(researchers, on="researcher_idx")
    out = rows.filter(pl.col("r_init").str.starts_with(pl.col("b_init")))
    return out.select(list(LINK_SCHEMA)).cast(LINK_SCHEMA).sort("pub_idx", "byline_index", "researcher_idx")


@dataclass(frozen=True)
class FilterResult:
    links: pl.DataFrame
    diagnostics: dict


def _affiliation_blob(affiliations: Iterable[str]) -> list[str]:
    return [" " + " ".join(name_tokens(a)) + " " for a in affiliations]


def _category_profiles(unambiguous: pl.DataFrame, pubs: pl.DataFrame, field_of: pl.Series) -> dict[str, dict[str, int]]:
    if unambiguous.height == 0:
        return {}
    pairs = (
        unambiguous.select("pub_idx", "researcher_idx")
        .with_columns(
            field_of.gather(unambiguous["researcher_idx"]).alias("field"),
            pubs["categories"].gather(unambiguous["pub_idx"]).alias("category"),
        )
        .explode("category", **EXPLODE_KW)
        .group_by("field", "category")
        .len()
        .sort("field", "category")
    )
    profiles: dict[str, dict[str, int]] = defaultdict(dict)
    for f, c, n in pairs.iter_rows():
        profiles[f][c] = n
    return dict(profiles)


def _affinity(profile: dict[str, int], categories: Sequence[str]) -> Fraction:
    """Squared cosine similarity up to the publication-side norm (common to all candidates)."""
    dot = sum(profile.get(c, 0) for c in set(categories))
    norm2 = sum(v * v for v in profile.values())
    return Fraction(dot * dot, norm2)


def filter_links(candidates: pl.DataFrame, corpus: Corpus) -> FilterResult:
    """Reduce candidate links to at most one researcher per byline.

    Ambiguous bylines are settled by, in order: the candidate whose institution
    appears in one of the publication's affiliation strings; the candidate whose
    field's category profile (learned from unambiguous links) is most similar to
    the publication's categories. Bylines still tied are dropped.
    """
    pubs = corpus.publications
    roster = corpus.roster
    counts = candidates.group_by("pub_idx", "byline_index").len()
    tagged = candidates.join(counts, on=["pub_idx", "byline_index"])
    unambiguous = tagged.filter(pl.col("len") == 1).drop("len")
    ambiguous = tagged.filter(pl.col("len") > 1).drop("len").sort("pub_idx", "byline_index", "researcher_idx")

    field_of = pl.Series([r.field_code for r in roster], dtype=pl.String)
    profiles = _category_profiles(unambiguous, pubs, field_of)
    inst_tokens = {}

    resolved_aff = resolved_cat = dropped = 0
    keep_rows: list[tuple] = []
    if ambiguous.height:
        need = ambiguous["pub_idx"].unique().sort()
        sub = pubs.select("affiliations", "categories")[need.to_list()]
        pub_aff = dict(zip(need.to_list(), sub["affiliations"].to_list()))
        pub_cat = dict(zip(need.to_list(), sub["categories"].to_list()))
        for (p, b), group in ambiguous.group_by(["pub_idx", "byline_index"], maintain_order=True):
            cands = group["researcher_idx"].to_list()
            blobs = _affiliation_blob(pub_aff[p] or ())
            hits = []
            for ri in cands:
                inst = inst_tokens.get(ri)
                if inst is None:
                    inst = inst_tokens[ri] = " " + " ".join(name_tokens(roster[ri].institution_id)) + " "
                if inst.strip() and any(inst in blob for blob in blobs):
                    hits.append(ri)
            if len(hits) == 1:
                winner, how = hits[0], "aff"
            else:
                pool = hits or cands
                fields = [roster[ri].field_code for ri in pool]
                if any(f not in profiles for f in fields):
                    winner = None
                else:
                    scores = [_affinity(profiles[f], pub_cat[p]) for f in fields]
                    best = max(scores)
                    winner = pool[scores.index(best)] if scores.count(best) == 1 else None
                how = "cat"
            if winner is None:
                dropped += 1
                continue
            if how == "aff":
                resolved_aff += 1
            else:
                resolved_cat += 1
            keep_rows.append((p, b, winner))

    chosen = pl.DataFrame(
        {"pub_idx": [r[0] for r in keep_rows], "byline_index": [r[1] for r in keep_rows],
         "researcher_idx": [r[2] for r in keep_rows]},
        schema={"pub_idx": pl.Int64, "byline_index": pl.Int64, "researcher_idx": pl.Int64},
    )
    settled = ambiguous.join(chosen, on=["pub_idx", "byline_index", "researcher_idx"], how="semi")
    links = pl.concat([unambiguous.select(list(LINK_SCHEMA)), settled.select(list(LINK_SCHEMA))])
    links = links.sort("pub_idx", "byline_index")
    diagnostics = {
        "candidate_links": candidates.height,
        "bylines_with_candidates": counts.height,
        "unambiguous": unambiguous.height,
        "resolved_by_affiliation": resolved_aff,
        "resolved_by_category": resolved_cat,
        "dropped": dropped,
        "links": links.height,
    }
    return FilterResult(links, diagnostics)


def resolve(corpus: Corpus) -> tuple[Corpus, dict]:
    """Candidate mapping plus filtering; returns the corpus with links attached."""
    candidates = candidate_map(corpus.roster, corpus.publications)
    result = filter_links(candidates, corpus)
    diagnostics = {"bylines_total": int(corpus.publications["author_count_total"].sum() or 0), **result.diagnostics}
    return corpus.with_links(result.links), diagnostics


@dataclass(frozen=True)
class ResolutionMetrics:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f_measure: float


def _link_keys(links) -> set[tuple[str, int, str]]:
    if isinstance(links, pl.DataFrame):
        return set(links.select("publication_id", "byline_index", "researcher_id").iter_rows())
    return {(l.publication_id, l.byline_index, l.researcher_id) for l in links}


def score_links(links, truth) -> ResolutionMetrics:
    """Precision, recall and F-measure of resolved links against ground truth.

    Links compare on (publication, byline position, researcher). Undefined
    ratios (empty denominators) are reported as 0.
    """
    got, want = _link_keys(links), _link_keys(truth)
    tp = len(got & want)
    fp = len(got - want)
    fn = len(want - got)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return ResolutionMetrics(tp, fp, fn, precision, recall, f)


__all__ = [
    "AuthorshipLink",
    "FilterResult",
    "ResolutionMetrics",
    "RosterNameIndex",
    "candidate_map",
    "filter_links",
    "fold",
    "initials",
    "links_to_set",
    "parse_byline",
    "resolve",
    "score_links",
    "surname_keys",
]
