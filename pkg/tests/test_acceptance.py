"""Acceptance criteria 1-9, one test each.

Each test records a one-line PASS/FAIL verdict (printed in the terminal
summary) and then asserts it. Tolerances and budgets are fixed constants.
"""

import os
import subprocess
import sys
import time

import numpy as np
import polars as pl

from fieldstrength.analytics import (
    FieldStats,
    eligible_fields,
    field_stats,
    incidence_vector,
    percentile_rank,
    rank_correlation,
    rank_disciplines,
    top_table,
)
from fieldstrength.disambig import resolve, score_links
from fieldstrength.hca import PercentileTable
from fieldstrength.rounding import format_pct
from fieldstrength.scoring import publication_credit, top_scientists_fractional, top_scientists_full
from fieldstrength.synth import (
    FieldSpec,
    SynthConfig,
    default_config,
    generate_corpus,
    gradient_config,
    paired_config,
    run_bias_experiment,
    scale_config,
)

from oracles import heavy_tailed_stratum, pearson_on_average_ranks, stratum_superiors
from reference_tables import DISCIPLINE_TABLES, EARTH_FIELDS_FULL_1, EARTH_PRINTED_PERCENTILE

HCA_BUDGET_S = 10.0
BIAS_BUDGET_S = 300.0
SCALE_BUDGET_S = 60.0
SPEARMAN_TOL = 1e-12
CREDIT_TOL = 1e-9


def test_criterion_1_discipline_tables(criterion):
    rows_checked, failures = 0, []
    for key, (rows, total) in DISCIPLINE_TABLES.items():
        ranked = rank_disciplines((name, 0, staff, ts) for name, staff, ts, _, _ in rows)
        by_name = {d.discipline_code: d for d in ranked}
        for name, staff, ts, printed, rank in rows:
            rows_checked += 1
            d = by_name[name]
            if d.incidence_pct != printed or d.rank != rank:
                failures.append(f"{key}/{name}: {d.incidence_pct} rank {d.rank}")
        staff_total, ts_total, printed_total = total
        if (sum(r[1] for r in rows), sum(r[2] for r in rows)) != (staff_total, ts_total):
            failures.append(f"{key}: column sums differ from the printed total")
        if format_pct(ts_total, staff_total) != printed_total:
            failures.append(f"{key}: total {format_pct(ts_total, staff_total)}")
    ok = rows_checked == 33 and not failures
    criterion(1, ok, f"{rows_checked} rows, {len(failures)} mismatches {failures[:3]}")
    assert ok


def test_criterion_2_earth_fields(criterion):
    fields = [FieldStats(code, "EAR", staff, ts) for code, staff, ts, _ in EARTH_FIELDS_FULL_1]
    shown = {f.field_code: f.incidence_pct for f in fields}
    mismatched = [code for code, _, _, printed in EARTH_FIELDS_FULL_1 if shown[code] != printed]
    order = [f.field_code for f in top_table(fields, len(fields))]
    printed_order = [row[0] for row in EARTH_FIELDS_FULL_1]
    ranked = {f.field_code: f.percentile_rank for f in percentile_rank(fields)}
    endpoints = ranked["GEO/03"] == 100.0 and ranked["GEO/05"] == 0.0
    seq = [ranked[c] for c in printed_order]
    printed = EARTH_PRINTED_PERCENTILE
    consistent = all(a > b for a, b in zip(seq, seq[1:])) and all(
        (seq[i] > seq[j]) == (printed[i] > printed[j]) for i in range(12) for j in range(12)
    )
    ok = not mismatched and order == printed_order and endpoints and consistent
    criterion(2, ok, f"12 rows, incidence mismatches {mismatched}, order {'ok' if order == printed_order else order}, "
                     f"endpoints {endpoints}, percentile order consistent {consistent}")
    assert ok


def test_criterion_3_hca_oracle(criterion):
    rng = np.random.default_rng(20240601)
    n_strata = 1000
    sizes = rng.integers(1, 501, n_strata)
    cites = [heavy_tailed_stratum(rng, int(s)) for s in sizes]
    tied = sum(len(c) - len(np.unique(c)) > 0 for c in cites)
    stratum = np.repeat(np.arange(n_strata), sizes)
    frame = pl.DataFrame(
        {
            "publication_id": [f"P{i:07d}" for i in range(int(sizes.sum()))],
            "year": (2006 + stratum % 5).tolist(),
            "categories": [[f"C{s // 5:04d}"] for s in stratum.tolist()],
            "citations": np.concatenate(cites).tolist(),
        }
    )
    thresholds = [1.0, 5.0, *np.round(rng.uniform(0.1, 50.0, 2), 6).tolist()]

    start = time.perf_counter()
    table = PercentileTable(frame)
    masks = {p: table.hca(p).mask for p in thresholds}
    elapsed = time.perf_counter() - start

    superiors = np.concatenate([stratum_superiors(c) for c in cites])
    size_of = np.repeat(sizes, sizes)
    mismatches = 0
    for p in thresholds:
        expected = 100.0 * superiors / size_of < p
        mismatches += int((expected != masks[p]).sum())
    ok = mismatches == 0 and elapsed < HCA_BUDGET_S
    criterion(3, ok, f"{n_strata} strata ({tied} with ties, {int(sizes.sum())} pubs), p={thresholds}, "
                     f"{mismatches} mismatches, {elapsed:.2f}s (budget {HCA_BUDGET_S:.0f}s)")
    assert ok


def _corpora():
    for seed in (11, 12, 13):
        syn = generate_corpus(default_config(seed))
        yield f"default/{seed}/resolved", resolve(syn.corpus)[0]
        yield f"default/{seed}/truth", syn.corpus.with_links(syn.truth)
    for cfg in (paired_config(21), gradient_config(22, n_fields=8, national_staff=60)):
        syn = generate_corpus(cfg)
        yield f"{cfg.fields[0].field_code}/{cfg.seed}", syn.corpus.with_links(syn.truth)


def test_criterion_4_containments(criterion):
    thetas = [0.02, 0.05, 0.1, 0.2, 0.5, 1.0]
    ps = [0.5, 1.0, 2.5, 5.0, 10.0]
    checks = violations = 0
    names = []
    for name, corpus in _corpora():
        names.append(name)
        table = PercentileTable(corpus.publications)
        hcas = {p: table.hca(p) for p in ps}
        full = {p: top_scientists_full(corpus, hcas[p]).members for p in ps}
        frac = {(p, t): top_scientists_fractional(corpus, hcas[p], t).members for p in ps for t in thetas}
        for lo, hi in zip(ps, ps[1:]):
            checks += 3
            violations += not hcas[lo].issubset(hcas[hi])
            violations += not full[lo] <= full[hi]
            violations += not frac[(lo, 0.1)] <= frac[(hi, 0.1)]
        for p in ps:
            for t in thetas:
                checks += 1
                violations += not frac[(p, t)] <= full[p]
            for t_lo, t_hi in zip(thetas, thetas[1:]):
                checks += 1
                violations += not frac[(p, t_hi)] <= frac[(p, t_lo)]
    ok = violations == 0
    criterion(4, ok, f"{len(names)} corpora, {checks} containment checks, {violations} violations")
    assert ok


def _credit_sums(corpus):
    """Per-publication float sums of 1/author_count_total over linked bylines."""
    links = corpus.links
    sums = links.group_by("publication_id").agg(
        (1.0 / pl.col("author_count_total")).sum().alias("credit"),
        pl.len().alias("linked"),
        pl.col("author_count_total").first().alias("n"),
    )
    return sums


def test_criterion_5_credit_conservation(criterion):
    base = default_config(31)
    domestic = SynthConfig(seed=31, fields=tuple(
        FieldSpec(f.field_code, f.national_staff, world_staff_multiplier=0.0,
                  publication_intensity=f.publication_intensity, coauthor_mean=f.coauthor_mean,
                  grand_rate=f.grand_rate, quality_mu=f.quality_mu) for f in base.fields), short_tenure_rate=0.0)
    syn = generate_corpus(domestic)
    closed = _credit_sums(syn.corpus.with_links(syn.truth))
    all_linked = closed.filter(pl.col("linked") == pl.col("n"))
    closed_ok = all_linked.height == closed.height == syn.corpus.n_publications
    worst = float((all_linked["credit"] - 1.0).abs().max())
    closed_ok = closed_ok and worst <= CREDIT_TOL
    exact = publication_credit(syn.corpus.with_links(syn.truth).links)
    closed_ok = closed_ok and len(exact) == syn.corpus.n_publications and all(c == 1 for c in exact.values())

    mixed = generate_corpus(default_config(32))
    open_sums = _credit_sums(mixed.corpus.with_links(mixed.truth)).filter(pl.col("linked") < pl.col("n"))
    open_ok = open_sums.height > 0 and bool((open_sums["credit"] < 1.0).all())
    ok = closed_ok and open_ok
    criterion(5, ok, f"all-roster corpus: {all_linked.height} pubs, max |sum-1| {worst:.1e} (tol {CREDIT_TOL:g}); "
                     f"with foreign authors: {open_sums.height} pubs, all sums < 1: {open_ok}")
    assert ok


def _gradient_rho(seed: int) -> float:
    syn = generate_corpus(gradient_config(seed))
    corpus = syn.corpus.with_links(syn.truth)
    table = PercentileTable(corpus.publications)
    active = set(corpus.links["researcher_id"].unique().to_list())
    fields = sorted(eligible_fields(corpus.roster, active, 0.5))
    v1 = incidence_vector(field_stats(corpus, top_scientists_full(corpus, table.hca(1)), fields))
    v5 = incidence_vector(field_stats(corpus, top_scientists_full(corpus, table.hca(5)), fields))
    return rank_correlation(v1, v5).rho


def test_criterion_6_spearman(criterion):
    x = [0.3, 0.1, 0.9, 0.5, 0.7, 0.2]
    exact = (
        rank_correlation(x, x).rho == 1.0
        and rank_correlation(x, [-v for v in x]).rho == -1.0
        and rank_correlation([1, 2, 3, 4], [1, 3, 2, 4]).rho == 0.8
    )
    rng = np.random.default_rng(606)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(5, 60))
        a = rng.integers(0, max(2, n // 3), n).tolist()
        b = rng.integers(0, max(2, n // 4), n).tolist()
        if len(set(a)) < 2:
            a[0], a[1] = 0, 1
        if len(set(b)) < 2:
            b[0], b[1] = 0, 1
        worst = max(worst, abs(rank_correlation(a, b).rho - pearson_on_average_ranks(a, b)))
    rhos = [_gradient_rho(seed) for seed in range(100)]
    above = sum(r > 0.8 for r in rhos)
    ok = exact and worst <= SPEARMAN_TOL and above >= 95
    criterion(6, ok, f"exact cases {exact}; max |rho - oracle| {worst:.1e} over 100 tied vectors; "
                     f"TS1 vs TS5 rho > 0.8 in {above}/100 replications (min {min(rhos):.3f}, mean {np.mean(rhos):.3f})")
    assert ok


def test_criterion_7_disambiguation(criterion, default_synth):
    corpus = default_synth.corpus
    bylines = int(corpus.publications["author_count_total"].sum())
    keys = [(r.surname, r.given_name_tokens[0][0]) for r in corpus.roster]
    counts = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    homonym_share = sum(1 for k in keys if counts[k] > 1) / len(keys)
    resolved, _ = resolve(corpus)
    m = score_links(resolved.links, default_synth.truth)
    ok = bylines >= 5000 and homonym_share >= 0.02 and m.f_measure >= 0.95 and m.precision >= m.recall
    criterion(7, ok, f"{bylines} bylines, {homonym_share:.1%} homonyms; P {m.precision:.4f} R {m.recall:.4f} "
                     f"F {m.f_measure:.4f}")
    assert ok


def test_criterion_8_bias_experiment(criterion):
    start = time.perf_counter()
    report = run_bias_experiment(paired_config(1000, intensity=(5.0, 10.0)), 200, workers=os.cpu_count() or 1)
    elapsed = time.perf_counter() - start
    pvalue = report.sign_test_pvalue()
    share = report.share_fractional_smaller()
    ok = report.incidence_gap_full > 0 and pvalue < 0.01 and share >= 0.60 and elapsed < BIAS_BUDGET_S
    criterion(8, ok, f"200 replications at 1:2; full gap {report.incidence_gap_full:.4f} (sign test p {pvalue:.1e}); "
                     f"fractional gap {report.incidence_gap_fractional:.4f}; fractional < full in {share:.1%}; "
                     f"{elapsed:.1f}s")
    assert ok


def test_criterion_9_scale_determinism(criterion, tmp_path):
    syn = generate_corpus(scale_config())
    paths = syn.write(tmp_path / "input")
    n_pubs = syn.corpus.n_publications
    del syn
    cmd = [sys.executable, "-m", "fieldstrength", "pipeline", "--roster", str(paths["roster"]),
           "--publications", str(paths["publications"]), "--threads", str(os.cpu_count() or 1)]
    times = []
    for name in ("run1", "run2"):
        start = time.perf_counter()
        subprocess.run(cmd + ["--out", str(tmp_path / name)], check=True, capture_output=True)
        times.append(time.perf_counter() - start)
    files = sorted(p.name for p in (tmp_path / "run1").iterdir())
    differing = [f for f in files if (tmp_path / "run1" / f).read_bytes() != (tmp_path / "run2" / f).read_bytes()]
    same_names = files == sorted(p.name for p in (tmp_path / "run2").iterdir())
    ok = n_pubs >= 1_000_000 and max(times) < SCALE_BUDGET_S and same_names and not differing
    criterion(9, ok, f"{n_pubs} publications; runs {times[0]:.1f}s and {times[1]:.1f}s (budget {SCALE_BUDGET_S:.0f}s); "
                     f"{len(files)} files, {len(differing)} differ")
    assert ok
