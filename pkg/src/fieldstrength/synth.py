"""Seeded synthetic world corpora with planted ground truth, and the bias experiments.

Every field has a national staff (the roster) and a world staff (non-roster
authors in the same strata), each researcher carrying a latent quality. Field
publications draw their bylines from the pooled national and world staff;
citation counts follow a discrete lognormal whose location moves with the
authors' mean log quality. Byline strings pass through a name-variant model
(initials-only renderings, lost diacritics, planted homonyms) while the truth
links record who really wrote what.
"""

from __future__ import annotations

import logging
import multiprocessing
import unicodedata
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields as dc_fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import polars as pl
import pyarrow as pa

from .corpus import (
    LINK_SCHEMA,
    PUBLICATION_SCHEMA,
    AnalysisWindow,
    Corpus,
    FieldTaxonomy,
    Researcher,
    default_taxonomy,
    write_links,
    write_publications,
    write_roster,
    write_taxonomy,
)
from .errors import DataValidationError, InputError

log = logging.getLogger(__name__)

# ----------------------------------------------------------------------------- config


@dataclass(frozen=True)
class FieldSpec:
    field_code: str
    national_staff: int
    world_staff_multiplier: float = 4.0
    publication_intensity: float = 5.0  # expected authorships per researcher over the window
    coauthor_mean: float = 4.0  # mean byline length, shifted geometric on {1, 2, ...}
    grand_rate: float = 0.0  # share of publications written by very large collaborations
    quality_mu: float = 0.0  # log-mean latent quality of the national staff
    quality_sigma: float = 1.0
    categories: tuple[str, ...] = ()  # first entry is the field's main category

    def main_categories(self) -> tuple[str, ...]:
        return self.categories or ("SC-" + self.field_code.replace("/", "-"),)


@dataclass(frozen=True)
class CitationModel:
    mu: float = 1.5
    sigma: float = 1.0
    quality_weight: float = 1.0


@dataclass(frozen=True)
class NameVariantRates:
    initials_only: float = 0.5
    diacritic_loss: float = 0.3
    homonym: float = 0.03
    foreign_homonym: float = 0.0
    missing_affiliations: float = 0.03


@dataclass(frozen=True)
class SynthConfig:
    seed: int
    fields: tuple[FieldSpec, ...]
    window: AnalysisWindow = AnalysisWindow(2006, 2010, 3)
    citation_model: CitationModel = CitationModel()
    name_variant_rates: NameVariantRates = NameVariantRates()
    world_quality_mu: float = 0.0
    world_quality_sigma: float = 1.0
    n_institutions: int = 60
    multi_category_rate: float = 0.2
    grand_size_min: int = 100
    grand_size_alpha: float = 1.2
    short_tenure_rate: float = 0.02

    def __post_init__(self):
        validate_config(self)


def validate_config(cfg: SynthConfig) -> None:
    if not cfg.fields:
        raise InputError("synthetic config needs at least one field")
    if not 0 <= cfg.seed < 2**64:
        raise InputError("seed must be a 64-bit unsigned integer")
    codes = [f.field_code for f in cfg.fields]
    if len(set(codes)) != len(codes):
        raise InputError("field codes must be unique")
    for f in cfg.fields:
        if f.national_staff < 1:
            raise InputError(f"{f.field_code}: national_staff must be at least 1")
        if f.world_staff_multiplier < 0:
            raise InputError(f"{f.field_code}: world_staff_multiplier must be non-negative")
        if not f.publication_intensity > 0:
            raise InputError(f"{f.field_code}: publication_intensity must be positive")
        if f.coauthor_mean < 1:
            raise InputError(f"{f.field_code}: coauthor_mean must be at least 1")
        if not 0 <= f.grand_rate <= 1:
            raise InputError(f"{f.field_code}: grand_rate must lie in [0, 1]")
        if f.quality_sigma < 0:
            raise InputError(f"{f.field_code}: quality_sigma must be non-negative")
    for name, value in asdict(cfg.name_variant_rates).items():
        if not 0 <= value <= 1:
            raise InputError(f"name variant rate {name} must lie in [0, 1]")
    for name in ("multi_category_rate", "short_tenure_rate"):
        if not 0 <= getattr(cfg, name) <= 1:
            raise InputError(f"{name} must lie in [0, 1]")
    if cfg.n_institutions < 1 or cfg.grand_size_min < 2 or cfg.grand_size_alpha <= 0:
        raise InputError("n_institutions >= 1, grand_size_min >= 2 and grand_size_alpha > 0 required")
    if cfg.citation_model.sigma < 0:
        raise InputError("citation sigma must be non-negative")


# ----------------------------------------------------------------------------- names

_IT_ONSETS = ["b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "ch", "gr", "st", "tr", "sc",
              "gn", "pr", "cr", "fr"]
_IT_VOWELS = ["a", "e", "i", "o", "u"]
_IT_ENDINGS = ["i", "o", "a", "e", "ini", "elli", "etti", "one", "ucci", "ari", "oni", "ato", "ino", "esi", "anti", "ò",
               "à", "ù"]
_IT_PARTICLES = ["De", "Di", "Lo", "La", "Del", "Dalla"]
_IT_GIVEN = ["Mario", "Marta", "Luca", "Lucia", "Giulia", "Giuseppe", "Giovanni", "Anna", "Andrea", "Alessandro",
             "Alessandra", "Francesca", "Francesco", "Paolo", "Paola", "Roberto", "Roberta", "Stefano", "Stefania",
             "Marco", "Maria", "Elena", "Enrico", "Emanuele", "Chiara", "Claudio", "Carla", "Davide", "Daniela",
             "Federico", "Federica", "Silvia", "Simone", "Sara", "Niccolò", "Nicolò", "Lorenzo", "Laura", "Pietro",
             "Piera", "Tommaso", "Teresa", "Valerio", "Valentina", "Vincenzo", "Ilaria", "Irene", "Ottavio", "Olga",
             "Raffaele", "Rita", "Umberto", "Ugo", "Beatrice", "Bruno", "Gabriele", "Gianluca", "Zeno", "Éva", "Agnese"]
_W_ONSETS = ["b", "d", "h", "j", "k", "l", "m", "n", "p", "r", "s", "sch", "sh", "th", "w", "y", "zh", "x", "q", "kh",
             "ts", "bj", "gw", "ö"]
_W_VOWELS = ["a", "e", "i", "o", "u", "ee", "ou", "ai", "y", "ü", "å", "é"]
_W_ENDINGS = ["son", "berg", "man", "ski", "ng", "ez", "ov", "sen", "ton", "ley", "er", "ang", "ic", "wood", "feld",
              "stein", "ova", "ard"]
_W_GIVEN = ["John", "James", "Mary", "Wei", "Li", "Hiroshi", "Yuki", "Hans", "Greta", "Pierre", "Sophie", "Ahmed",
            "Fatima", "Carlos", "Lucía", "Olga", "Ivan", "Sven", "Ingrid", "Raj", "Priya", "Kwame", "Amara", "Chen",
            "Jin", "Noah", "Emma", "Liam", "Olivia", "Mateo", "Chloé", "Jürgen", "Søren", "Zoë", "Björn"]


def strip_diacritics(text: str) -> str:
    return "".join(ch for ch in unicodedata.normalize("NFKD", text) if not unicodedata.combining(ch))


def _surnames(rng: np.random.Generator, n: int, onsets, vowels, endings, particle_rate: float,
              double_rate: float) -> list[str]:
    o = rng.integers(0, len(onsets), size=(n, 3))
    v = rng.integers(0, len(vowels), size=(n, 3))
    e = rng.integers(0, len(endings), size=n)
    three = rng.random(n) < 0.4
    kind = rng.random(n)
    partner = rng.integers(0, max(n, 1), size=n)
    part = rng.integers(0, len(_IT_PARTICLES), size=n)
    base = []
    for i in range(n):
        stem = onsets[o[i, 0]] + vowels[v[i, 0]] + onsets[o[i, 1]] + vowels[v[i, 1]]
        if three[i]:
            stem += onsets[o[i, 2]] + vowels[v[i, 2]]
        base.append((stem + endings[e[i]]).capitalize())
    out = []
    for i in range(n):
        name = base[i]
        if kind[i] < particle_rate:
            name = f"{_IT_PARTICLES[part[i]]} {name}"
        elif kind[i] < particle_rate + double_rate:
            name = f"{name}-{base[partner[i]]}"
        out.append(name)
    return out


def _given(rng: np.random.Generator, n: int, pool: Sequence[str], second_rate: float) -> list[tuple[str, ...]]:
    a = rng.integers(0, len(pool), size=n)
    b = rng.integers(0, len(pool), size=n)
    two = rng.random(n) < second_rate
    return [(pool[a[i]], pool[b[i]]) if two[i] and b[i] != a[i] else (pool[a[i]],) for i in range(n)]


def _initials_form(given: tuple[str, ...]) -> str:
    letters = []
    for tok in given:
        letters.extend(part[0] for part in tok.split("-") if part)
    return ".".join(letters) + "."


# ----------------------------------------------------------------------------- generation


@dataclass(frozen=True)
class SynthCorpus:
    """Generated corpus plus everything the generator knows that an analyst would not."""

    corpus: Corpus
    truth: pl.DataFrame  # LINK_SCHEMA, resolved against corpus.roster
    roster_rows: tuple[Researcher, ...]  # every roster row written out, including short-tenure ones
    quality: dict[str, float]  # latent log quality of roster researchers
    config: SynthConfig

    def write(self, out_dir) -> dict[str, Path]:
        """Emit roster/publication/taxonomy/truth files in the ingestion formats."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "roster": out / "roster.csv",
            "publications": out / "publications.jsonl",
            "taxonomy": out / "taxonomy.csv",
            "truth": out / "truth_links.csv",
            "config": out / "synth_config.toml",
        }
        write_roster(self.roster_rows, paths["roster"])
        write_publications(self.corpus.publications, paths["publications"])
        write_taxonomy(self.corpus.taxonomy, paths["taxonomy"])
        write_links(self.truth, paths["truth"])
        paths["config"].write_text(dump_config(self.config), encoding="utf-8")
        return paths


def _rng(seed: int, *stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, *stream]))


def _draw_teams(rng: np.random.Generator, sizes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Distinct author indices for each team, drawn with probability proportional to ``weights``.

    Indices are concatenated in team order.
    """
    pool = len(weights)
    cdf = np.cumsum(weights / weights.sum())

    def draw(n):
        return np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), pool - 1)

    pub_of = np.repeat(np.arange(len(sizes)), sizes)
    authors = draw(int(sizes.sum()))
    while True:
        order = np.lexsort((authors, pub_of))
        a, p = authors[order], pub_of[order]
        dup = np.zeros(len(a), dtype=bool)
        dup[1:] = (a[1:] == a[:-1]) & (p[1:] == p[:-1])
        if not dup.any():
            return authors
        idx = order[dup]
        authors[idx] = draw(len(idx))


def _list_column(values, offsets: np.ndarray, value_type=pa.string()) -> pl.Series:
    arr = pa.ListArray.from_arrays(pa.array(offsets, type=pa.int64()), pa.array(values, type=value_type))
    return pl.from_arrow(arr)


def generate_corpus(config: SynthConfig, taxonomy: FieldTaxonomy | None = None) -> SynthCorpus:
    """Generate a world corpus. Deterministic in ``config`` (including its seed)."""
    validate_config(config)
    taxonomy = taxonomy or default_taxonomy()
    for f in config.fields:
        taxonomy.discipline_of(f.field_code)
    window = config.window
    rates = config.name_variant_rates
    cm = config.citation_model
    seed = config.seed

    nat_sizes = np.array([f.national_staff for f in config.fields])
    world_sizes = np.array([int(round(f.national_staff * f.world_staff_multiplier)) for f in config.fields])
    n_nat, n_world = int(nat_sizes.sum()), int(world_sizes.sum())
    nat_start = np.concatenate([[0], np.cumsum(nat_sizes)])
    world_start = n_nat + np.concatenate([[0], np.cumsum(world_sizes)])

    # Researchers: names, institutions, tenure, quality.
    rng = _rng(seed, 0)
    nat_surnames = _surnames(rng, n_nat, _IT_ONSETS, _IT_VOWELS, _IT_ENDINGS, 0.05, 0.03)
    nat_given = _given(rng, n_nat, _IT_GIVEN, 0.2)
    homonym = rng.random(n_nat) < rates.homonym
    donor = (rng.random(n_nat) * np.arange(n_nat)).astype(np.int64)
    pick = rng.integers(0, 1 << 30, size=n_nat)
    by_initial: dict[str, list[str]] = {}
    for g in _IT_GIVEN:
        by_initial.setdefault(g[0], []).append(g)
    for i in np.flatnonzero(homonym):
        if i == 0:
            continue
        j = donor[i]
        nat_surnames[i] = nat_surnames[j]
        # Same surname and first initial, different given name: only initials-only
        # bylines are ambiguous between the two.
        options = [g for g in by_initial[nat_given[j][0][0]] if g != nat_given[j][0]]
        if options:
            nat_given[i] = (options[pick[i] % len(options)],)
    institutions = rng.integers(0, config.n_institutions, size=n_nat)
    short = rng.random(n_nat) < config.short_tenure_rate
    tenure = np.where(short, rng.integers(0, window.min_tenure_years, size=n_nat), window.length)

    w_surnames = _surnames(rng, n_world, _W_ONSETS, _W_VOWELS, _W_ENDINGS, 0.0, 0.02)
    w_given = _given(rng, n_world, _W_GIVEN, 0.3)
    fh = np.flatnonzero(rng.random(n_world) < rates.foreign_homonym)
    fh_src = rng.integers(0, max(n_nat, 1), size=len(fh))
    for w, j in zip(fh, fh_src):
        w_surnames[w], w_given[w] = nat_surnames[j], nat_given[j]
    w_inst = rng.integers(0, max(1, n_world // 20), size=n_world)

    field_of_nat = np.repeat(np.arange(len(config.fields)), nat_sizes)
    field_of_world = np.repeat(np.arange(len(config.fields)), world_sizes)
    q_rng = _rng(seed, 1)
    mu = np.array([f.quality_mu for f in config.fields])
    sd = np.array([f.quality_sigma for f in config.fields])
    log_q = np.concatenate([
        mu[field_of_nat] + sd[field_of_nat] * q_rng.standard_normal(n_nat),
        config.world_quality_mu + config.world_quality_sigma * q_rng.standard_normal(n_world),
    ])

    # Publications per field.
    all_cats = [f.main_categories()[0] for f in config.fields]
    years_l, cats_off, cats_val, cit_l, slot_auth, sizes_l, field_l = [], [], [], [], [], [], []
    for k, f in enumerate(config.fields):
        r = _rng(seed, 2, k)
        pool_nat, pool_world = int(nat_sizes[k]), int(world_sizes[k])
        pool = pool_nat + pool_world
        expected = f.publication_intensity * pool / f.coauthor_mean
        n_pubs = int(r.poisson(expected))
        if n_pubs == 0:
            continue
        sizes = r.geometric(1.0 / f.coauthor_mean, size=n_pubs) if f.coauthor_mean > 1 else np.ones(n_pubs, int)
        grand = r.random(n_pubs) < f.grand_rate
        if grand.any():
            big = np.floor(config.grand_size_min * (1.0 + r.pareto(config.grand_size_alpha, size=int(grand.sum()))))
            sizes[grand] = big.astype(np.int64)
        sizes = np.minimum(sizes, max(1, pool // 2 if pool > 3 else pool)).astype(np.int64)
        # Researchers on staff for only part of the window publish proportionally less.
        activity = np.ones(pool)
        activity[:pool_nat] = tenure[nat_start[k]:nat_start[k + 1]] / window.length
        activity[:pool_nat] = np.maximum(activity[:pool_nat], 0.5 / window.length)
        local = _draw_teams(r, sizes, activity)
        glob = np.where(local < pool_nat, nat_start[k] + local, world_start[k] + (local - pool_nat))
        pub_of = np.repeat(np.arange(n_pubs), sizes)
        mean_q = np.bincount(pub_of, weights=log_q[glob], minlength=n_pubs) / sizes
        loc = cm.mu + cm.quality_weight * mean_q + cm.sigma * r.standard_normal(n_pubs)
        cit = np.floor(np.exp(loc)).astype(np.int64)
        years = r.integers(window.start_year, window.end_year + 1, size=n_pubs)
        own = f.main_categories()
        extra = r.random(n_pubs) < config.multi_category_rate
        extra_pick = r.integers(0, 1 << 30, size=n_pubs)
        for i in range(n_pubs):
            cats = [own[0]]
            if extra[i]:
                choices = own[1:] or all_cats
                c = choices[extra_pick[i] % len(choices)]
                if c != own[0]:
                    cats.append(c)
            cats_off.append(len(cats))
            cats_val.extend(cats)
        years_l.append(years)
        cit_l.append(cit)
        slot_auth.append(glob)
        sizes_l.append(sizes)
        field_l.append(np.full(n_pubs, k))

    total_researchers = n_nat + n_world
    if years_l:
        years = np.concatenate(years_l)
        cits = np.concatenate(cit_l)
        authors = np.concatenate(slot_auth)
        sizes = np.concatenate(sizes_l)
    else:
        years = cits = authors = sizes = np.zeros(0, dtype=np.int64)
    n_pubs = len(years)
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    pub_of = np.repeat(np.arange(n_pubs), sizes)
    byline_index = np.arange(len(authors)) - offsets[pub_of] if n_pubs else np.zeros(0, np.int64)

    # Byline rendering: four variants per researcher, one chosen per authorship.
    surnames = nat_surnames + w_surnames
    givens = nat_given + w_given
    variants = np.empty(4 * total_researchers, dtype=object)
    for i in range(total_researchers):
        full = f"{surnames[i]}, {' '.join(givens[i])}"
        short_form = f"{surnames[i]}, {_initials_form(givens[i])}"
        variants[4 * i] = full
        variants[4 * i + 1] = short_form
        variants[4 * i + 2] = strip_diacritics(full)
        variants[4 * i + 3] = strip_diacritics(short_form)
    v_rng = _rng(seed, 3)
    choice = (v_rng.random(len(authors)) < rates.initials_only).astype(np.int64)
    choice += 2 * (v_rng.random(len(authors)) < rates.diacritic_loss)
    byline_strings = variants[4 * authors + choice]

    # Affiliations: distinct institutions among the authors, in byline order.
    inst_names = np.array(
        [f"Dept {config.fields[field_of_nat[i]].field_code}, UNIV-{institutions[i]:03d}, Italy" for i in range(n_nat)]
        + [f"INTL-{w_inst[i]:05d}, Abroad" for i in range(n_world)],
        dtype=object,
    )
    inst_key = np.concatenate([institutions, config.n_institutions + w_inst]).astype(np.int64)
    aff_frame = (
        pl.DataFrame({"pub": pub_of, "key": inst_key[authors] if len(authors) else np.zeros(0, np.int64),
                      "name": pl.Series(list(inst_names[authors]), dtype=pl.String)})
        .unique(subset=["pub", "key"], keep="first", maintain_order=True)
    )
    missing = v_rng.random(n_pubs) < rates.missing_affiliations
    aff_frame = aff_frame.filter(~pl.Series(missing).gather(aff_frame["pub"])) if n_pubs else aff_frame
    aff_counts = np.bincount(aff_frame["pub"].to_numpy(), minlength=n_pubs) if n_pubs else np.zeros(0, np.int64)
    aff_off = np.concatenate([[0], np.cumsum(aff_counts)]).astype(np.int64)
    cat_off = np.concatenate([[0], np.cumsum(np.array(cats_off, dtype=np.int64))]).astype(np.int64)

    pub_ids = [f"P{i:08d}" for i in range(n_pubs)]
    publications = pl.DataFrame(
        {
            "publication_id": pl.Series(pub_ids, dtype=pl.String),
            "year": pl.Series(years, dtype=pl.Int64),
            "categories": _list_column(cats_val, cat_off),
            "citations": pl.Series(cits, dtype=pl.Int64),
            "authors": _list_column(list(byline_strings), offsets),
            "affiliations": _list_column(aff_frame["name"].to_list(), aff_off),
            "author_count_total": pl.Series(sizes, dtype=pl.Int64),
        }
    ).cast(PUBLICATION_SCHEMA)

    # Roster and truth.
    roster_rows = tuple(
        Researcher(
            f"R{i:07d}", nat_surnames[i], nat_given[i], config.fields[field_of_nat[i]].field_code,
            taxonomy.discipline_of(config.fields[field_of_nat[i]].field_code), f"UNIV-{institutions[i]:03d}",
            int(tenure[i]),
        )
        for i in range(n_nat)
    )
    kept_mask = tenure >= window.min_tenure_years
    roster = tuple(r for r, ok in zip(roster_rows, kept_mask) if ok)
    roster_pos = np.full(n_nat, -1, dtype=np.int64)
    roster_pos[kept_mask] = np.arange(int(kept_mask.sum()))
    is_truth = authors < n_nat
    is_truth[is_truth] = kept_mask[authors[is_truth]]
    t_auth = authors[is_truth]
    t_pub = pub_of[is_truth]
    truth = pl.DataFrame(
        {
            "pub_idx": t_pub.astype(np.int64),
            "publication_id": pl.Series(pub_ids, dtype=pl.String).gather(t_pub) if len(t_pub) else pl.Series([], dtype=pl.String),
            "byline_index": byline_index[is_truth].astype(np.int64),
            "researcher_idx": roster_pos[t_auth],
            "researcher_id": pl.Series([r.researcher_id for r in roster], dtype=pl.String).gather(roster_pos[t_auth])
            if len(t_auth) else pl.Series([], dtype=pl.String),
            "author_count_total": sizes[t_pub].astype(np.int64),
        },
        schema=LINK_SCHEMA,
    ).sort("pub_idx", "byline_index")
    quality = {r.researcher_id: float(log_q[i]) for i, r in enumerate(roster_rows) if kept_mask[i]}
    corpus = Corpus(window, roster, publications, taxonomy)
    return SynthCorpus(corpus, truth, roster_rows, quality, config)


# ----------------------------------------------------------------------------- presets


def _hard_science_codes(taxonomy: FieldTaxonomy, n: int) -> list[str]:
    """``n`` field codes taken round-robin across the science disciplines."""
    order = ["PHY", "CHE", "EAR", "BIO", "MED", "AVS", "IIE", "MAT", "CEN", "ECS", "HPP"]
    pools = [list(taxonomy.fields_of(d)) for d in order]
    codes: list[str] = []
    depth = 0
    while len(codes) < n and any(depth < len(p) for p in pools):
        codes.extend(p[depth] for p in pools if depth < len(p))
        depth += 1
    if n > len(codes):
        raise InputError(f"at most {len(codes)} synthetic fields are available")
    return codes[:n]


def default_config(seed: int = 42, n_fields: int = 12, national_staff: int = 80) -> SynthConfig:
    """Desk-scale corpus: a dozen fields across several disciplines."""
    codes = _hard_science_codes(default_taxonomy(), n_fields)
    mus = np.linspace(-0.5, 0.5, n_fields)
    specs = tuple(
        FieldSpec(code, national_staff, world_staff_multiplier=4.0, publication_intensity=5.0 + (i % 3),
                  coauthor_mean=3.5 + (i % 4), grand_rate=0.02 if code.startswith("FIS") else 0.0,
                  quality_mu=float(mus[i]))
        for i, code in enumerate(codes)
    )
    return SynthConfig(seed=seed, fields=specs)


def gradient_config(seed: int, n_fields: int = 20, national_staff: int = 300, spread: float = 4.0) -> SynthConfig:
    """Fields identical except for a monotone national quality gradient."""
    codes = _hard_science_codes(default_taxonomy(), n_fields)
    mus = np.linspace(-spread / 2, spread / 2, n_fields)
    specs = tuple(
        FieldSpec(code, national_staff, world_staff_multiplier=3.0, publication_intensity=5.0, coauthor_mean=4.0,
                  quality_mu=float(mus[i]))
        for i, code in enumerate(codes)
    )
    return SynthConfig(seed=seed, fields=specs, short_tenure_rate=0.0)


def paired_config(seed: int, *, intensity=(5.0, 10.0), multiplier=(4.0, 4.0), national_staff: int = 400,
                  coauthor_mean: float = 8.0, grand_rate: float = 0.0) -> SynthConfig:
    """Two fields, identical except for publication intensity and/or world-staff multiplier."""
    specs = tuple(
        FieldSpec(code, national_staff, world_staff_multiplier=m, publication_intensity=lam,
                  coauthor_mean=coauthor_mean, grand_rate=grand_rate)
        for code, lam, m in zip(("FIS/01", "FIS/02"), intensity, multiplier)
    )
    return SynthConfig(seed=seed, fields=specs, short_tenure_rate=0.0)


def scale_config(seed: int = 7, n_publications: int = 1_000_000, n_fields: int = 200) -> SynthConfig:
    """Large corpus sized so the expected publication count slightly exceeds ``n_publications``."""
    codes = _hard_science_codes(default_taxonomy(), n_fields)
    lam, team, mult = 5.0, 4.0, 19.0
    per_field_pubs = n_publications * 1.004 / n_fields
    staff = int(np.ceil(per_field_pubs * team / (lam * (1 + mult))))
    mus = np.linspace(-0.5, 0.5, n_fields)
    specs = tuple(
        FieldSpec(code, staff, world_staff_multiplier=mult, publication_intensity=lam, coauthor_mean=team,
                  quality_mu=float(mus[(i * 37) % n_fields]))
        for i, code in enumerate(codes)
    )
    return SynthConfig(seed=seed, fields=specs, n_institutions=80)


# ----------------------------------------------------------------------------- config files


def load_config(path) -> SynthConfig:
    """Read a TOML synthetic-corpus configuration."""
    try:
        import tomllib  # type: ignore[import-not-found]
    except ModuleNotFoundError:
        import tomli as tomllib
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"{path}: {exc}") from None
    return config_from_dict(data)


def config_from_dict(data: dict) -> SynthConfig:
    data = dict(data)
    try:
        seed = int(data.pop("seed"))
        raw_fields = data.pop("fields")
    except KeyError as exc:
        raise InputError(f"config lacks required key {exc}") from None
    specs = []
    for item in raw_fields:
        item = dict(item)
        if "categories" in item:
            item["categories"] = tuple(item["categories"])
        specs.append(_build(FieldSpec, item))
    kwargs = {}
    if "window" in data:
        w = data.pop("window")
        kwargs["window"] = AnalysisWindow(int(w["start_year"]), int(w["end_year"]), int(w.get("min_tenure_years", 3)))
    if "citation_model" in data:
        kwargs["citation_model"] = _build(CitationModel, data.pop("citation_model"))
    if "name_variants" in data:
        kwargs["name_variant_rates"] = _build(NameVariantRates, data.pop("name_variants"))
    kwargs.update(data)
    return _build(SynthConfig, {"seed": seed, "fields": tuple(specs), **kwargs})


def _build(cls, values: dict):
    known = {f.name for f in dc_fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise InputError(f"unknown {cls.__name__} keys: {', '.join(sorted(unknown))}")
    try:
        return cls(**values)
    except TypeError as exc:
        raise InputError(f"bad {cls.__name__} values: {exc}") from None


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: SynthConfig) -> str:
    lines = [f"seed = {cfg.seed}"]
    for name in ("world_quality_mu", "world_quality_sigma", "n_institutions", "multi_category_rate",
                 "grand_size_min", "grand_size_alpha", "short_tenure_rate"):
        lines.append(f"{name} = {_toml_value(getattr(cfg, name))}")
    lines += ["", "[window]", f"start_year = {cfg.window.start_year}", f"end_year = {cfg.window.end_year}",
              f"min_tenure_years = {cfg.window.min_tenure_years}", "", "[citation_model]"]
    lines += [f"{k} = {_toml_value(v)}" for k, v in asdict(cfg.citation_model).items()]
    lines += ["", "[name_variants]"]
    lines += [f"{k} = {_toml_value(v)}" for k, v in asdict(cfg.name_variant_rates).items()]
    for f in cfg.fields:
        lines += ["", "[[fields]]"]
        for k, v in asdict(f).items():
            if k == "categories" and not v:
                continue
            lines.append(f"{k} = {_toml_value(v)}")
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------- experiments


@dataclass(frozen=True)
class BiasReport:
    """Mean incidence gaps (high-intensity field minus low-intensity field) over replications."""

    incidence_gap_full: float
    incidence_gap_fractional: float
    replications: int
    seeds: tuple[int, ...]
    gaps_full: tuple[float, ...] = field(repr=False, default=())
    gaps_fractional: tuple[float, ...] = field(repr=False, default=())
    varied: str = "publication_intensity"

    def sign_test_pvalue(self) -> float:
        """Two-sided sign test of the full-count gaps against zero (zero gaps discarded)."""
        from scipy.stats import binomtest

        pos = sum(g > 0 for g in self.gaps_full)
        neg = sum(g < 0 for g in self.gaps_full)
        if pos + neg == 0:
            return 1.0
        return float(binomtest(pos, pos + neg, 0.5, alternative="two-sided").pvalue)

    def share_fractional_smaller(self) -> float:
        """Share of replications whose fractional gap is strictly below the full gap."""
        if not self.gaps_full:
            return 0.0
        return sum(fr < fu for fu, fr in zip(self.gaps_full, self.gaps_fractional)) / len(self.gaps_full)

    def as_dict(self) -> dict:
        return {
            "varied": self.varied,
            "replications": self.replications,
            "seeds": list(self.seeds),
            "incidence_gap_full": self.incidence_gap_full,
            "incidence_gap_fractional": self.incidence_gap_fractional,
            "sign_test_pvalue": self.sign_test_pvalue(),
            "share_fractional_smaller": self.share_fractional_smaller(),
            "gaps_full": list(self.gaps_full),
            "gaps_fractional": list(self.gaps_fractional),
        }


_NEUTRAL = {"field_code": "", "categories": ()}


def _paired_fields(config: SynthConfig, varied: str) -> tuple[int, int]:
    """Check the two-field design; return (low, high) field positions for ``varied``."""
    if len(config.fields) != 2:
        raise InputError(f"paired experiment needs exactly two fields, got {len(config.fields)}")
    a, b = config.fields
    if replace(a, **_NEUTRAL, **{varied: 0.0}) != replace(b, **_NEUTRAL, **{varied: 0.0}):
        diffs = [f.name for f in dc_fields(FieldSpec)
                 if f.name not in ("field_code", "categories", varied) and getattr(a, f.name) != getattr(b, f.name)]
        raise InputError(f"fields differ in more than {varied}: {', '.join(diffs)}")
    if getattr(a, varied) <= getattr(b, varied):
        return 0, 1
    return 1, 0


def _replicate(args) -> tuple[float, float]:
    config, low, high, threshold_p, theta = args
    from .analytics import field_stats
    from .hca import PercentileTable
    from .scoring import top_scientists_fractional, top_scientists_full

    syn = generate_corpus(config)
    corpus = syn.corpus.with_links(syn.truth)
    hcas = PercentileTable(corpus.publications).hca(threshold_p)
    codes = [config.fields[low].field_code, config.fields[high].field_code]
    out = []
    for ts in (top_scientists_full(corpus, hcas), top_scientists_fractional(corpus, hcas, theta)):
        stats = {s.field_code: s.incidence for s in field_stats(corpus, ts, codes)}
        out.append(stats[codes[1]] - stats[codes[0]])
    return out[0], out[1]


def _paired_experiment(config: SynthConfig, replications: int, varied: str, threshold_p: float, theta: float,
                       workers: int) -> BiasReport:
    if replications < 1:
        raise InputError("replications must be at least 1")
    low, high = _paired_fields(config, varied)
    seeds = tuple((config.seed + i) % 2**64 for i in range(replications))
    jobs = [(replace(config, seed=s), low, high, threshold_p, theta) for s in seeds]
    if workers > 1:
        # Forking after polars has started its thread pool can deadlock the children.
        ctx = multiprocessing.get_context("spawn")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            results = list(pool.map(_replicate, jobs))
    else:
        results = [_replicate(j) for j in jobs]
    full = tuple(r[0] for r in results)
    frac = tuple(r[1] for r in results)
    return BiasReport(float(np.mean(full)), float(np.mean(frac)), replications, seeds, full, frac, varied)


def run_bias_experiment(config: SynthConfig, replications: int, threshold_p: float = 1.0, theta: float = 0.1,
                        workers: int = 1) -> BiasReport:
    """Intensity-bias experiment on two fields differing only in publication intensity.

    Each replication regenerates the corpus under its own seed, labels HCAs at
    ``threshold_p`` and measures full and fractional top-scientist incidence
    in both fields using the planted authorship links.
    """
    return _paired_experiment(config, replications, "publication_intensity", threshold_p, theta, workers)


def run_world_ratio_probe(config: SynthConfig, replications: int, threshold_p: float = 1.0, theta: float = 0.1,
                          workers: int = 1) -> BiasReport:
    """Same design, varying the world-staff multiplier instead. Measurement only.

    Gaps are reported as (field with more world staff) minus (field with fewer).
    """
    return _paired_experiment(config, replications, "world_staff_multiplier", threshold_p, theta, workers)


def check_generated(syn: SynthCorpus) -> None:
    """Raise if a generated corpus breaks an ingestion invariant (used by tests and the CLI)."""
    pubs = syn.corpus.publications
    if pubs.height and (pubs["citations"] < 0).any():
        raise DataValidationError("negative citations generated")
    if pubs.height and (pubs["categories"].list.len() == 0).any():
        raise DataValidationError("publication without categories generated")
    if pubs.height and (pubs["authors"].list.len() != pubs["author_count_total"]).any():
        raise DataValidationError("author_count_total mismatch")
