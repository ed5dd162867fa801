import numpy as np
import polars as pl
import pytest
from scipy.stats import spearmanr

from fieldstrength.corpus import load_publications, load_roster, load_taxonomy, read_links
from fieldstrength.errors import InputError
from fieldstrength.synth import (
    FieldSpec,
    NameVariantRates,
    SynthConfig,
    check_generated,
    config_from_dict,
    default_config,
    dump_config,
    generate_corpus,
    load_config,
    paired_config,
    run_bias_experiment,
    run_world_ratio_probe,
)


def test_seed_determinism(tmp_path):
    a = generate_corpus(default_config(seed=42)).write(tmp_path / "a")
    b = generate_corpus(default_config(seed=42)).write(tmp_path / "b")
    for key in a:
        assert a[key].read_bytes() == b[key].read_bytes(), key
    c = generate_corpus(default_config(seed=43)).write(tmp_path / "c")
    assert a["publications"].read_bytes() != c["publications"].read_bytes()


def test_default_corpus_size(default_synth):
    check_generated(default_synth)
    assert int(default_synth.corpus.publications["author_count_total"].sum()) >= 5000
    roster = default_synth.corpus.roster
    keys = [(r.surname, r.given_name_tokens[0][0]) for r in roster]
    shared = sum(1 for k in keys if keys.count(k) > 1)
    assert shared / len(roster) >= 0.02


def test_tiny_intensity_gives_empty_corpus():
    cfg = SynthConfig(seed=1, fields=(FieldSpec("FIS/01", 10, world_staff_multiplier=0.0, publication_intensity=0.0001),))
    syn = generate_corpus(cfg)
    assert syn.corpus.n_publications == 0
    assert syn.truth.height == 0
    check_generated(syn)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"fields": ()},
        {"fields": (FieldSpec("FIS/01", 0),)},
        {"fields": (FieldSpec("FIS/01", 5, publication_intensity=0),)},
        {"fields": (FieldSpec("FIS/01", 5), FieldSpec("FIS/01", 5))},
        {"fields": (FieldSpec("FIS/01", 5),), "name_variant_rates": NameVariantRates(homonym=1.5)},
        {"fields": (FieldSpec("FIS/01", 5),), "seed": -1},
    ],
)
def test_config_validation(kwargs):
    kwargs.setdefault("seed", 1)
    with pytest.raises(InputError):
        SynthConfig(**kwargs)


def test_unknown_field_code():
    with pytest.raises(Exception):
        generate_corpus(SynthConfig(seed=1, fields=(FieldSpec("NOPE/01", 5),)))


def test_toml_roundtrip(tmp_path):
    cfg = default_config(seed=5)
    path = tmp_path / "c.toml"
    path.write_text(dump_config(cfg), encoding="utf-8")
    assert load_config(path) == cfg


def test_config_rejects_unknown_keys():
    with pytest.raises(InputError, match="colour"):
        config_from_dict({"seed": 1, "fields": [{"field_code": "FIS/01", "national_staff": 3, "colour": "red"}]})
    with pytest.raises(InputError):
        config_from_dict({"fields": []})


def test_written_files_pass_ingestion(tmp_path, default_synth):
    paths = default_synth.write(tmp_path)
    window = default_synth.config.window
    tax = load_taxonomy(paths["taxonomy"])
    roster = load_roster(paths["roster"], window, tax)
    pubs = load_publications(paths["publications"], window)
    assert roster.items == default_synth.corpus.roster
    assert pubs.items.equals(default_synth.corpus.publications)
    assert pubs.excluded == 0
    assert read_links(paths["truth"], default_synth.corpus).equals(default_synth.truth)


def test_truth_independent_of_name_variants():
    plain = default_config(seed=9)
    varied = SynthConfig(**{**plain.__dict__, "name_variant_rates": NameVariantRates(0.0, 0.0, 0.03, 0.0, 0.03)})
    a, b = generate_corpus(plain), generate_corpus(varied)
    assert a.truth.equals(b.truth)
    assert a.corpus.publications.drop("authors").equals(b.corpus.publications.drop("authors"))
    assert not a.corpus.publications["authors"].equals(b.corpus.publications["authors"])


def test_citations_increase_with_quality(default_synth):
    corpus, truth = default_synth.corpus, default_synth.truth
    cites = corpus.publications["citations"]
    per = (
        truth.with_columns(cites.gather(truth["pub_idx"]).alias("c"))
        .group_by("researcher_id")
        .agg(pl.col("c").mean())
        .sort("researcher_id")
    )
    quality = [default_synth.quality[r] for r in per["researcher_id"].to_list()]
    rho, pvalue = spearmanr(quality, per["c"].to_numpy())
    assert rho > 0.3 and pvalue < 1e-6


def test_world_multiplier_null():
    # Two fields equal except for the world staff multiplier: the national
    # incidence gap should be zero in expectation (99.7% interval over 100 seeds).
    cfg = paired_config(1, intensity=(5.0, 5.0), multiplier=(2.0, 6.0), national_staff=150, coauthor_mean=4.0)
    report = run_world_ratio_probe(cfg, 100, threshold_p=5.0, workers=4)
    gaps = np.array(report.gaps_full)
    se = gaps.std(ddof=1) / np.sqrt(len(gaps))
    assert abs(gaps.mean()) <= 3 * se


def test_bias_experiment_symmetric_null():
    cfg = paired_config(2000, intensity=(5.0, 5.0), national_staff=200)
    report = run_bias_experiment(cfg, 40, workers=4)
    gaps = np.array(report.gaps_full)
    assert abs(gaps.mean()) <= 3 * gaps.std(ddof=1) / np.sqrt(len(gaps))
    assert report.replications == 40 and len(report.seeds) == 40


def test_bias_experiment_rejects_mismatched_fields():
    cfg = SynthConfig(seed=1, fields=(FieldSpec("FIS/01", 10, publication_intensity=5.0, coauthor_mean=3.0),
                                      FieldSpec("FIS/02", 10, publication_intensity=10.0)))
    with pytest.raises(InputError, match="coauthor_mean"):
        run_bias_experiment(cfg, 2)
    with pytest.raises(InputError):
        run_bias_experiment(default_config(), 2)


def test_bias_report_reproducible():
    cfg = paired_config(77, national_staff=100)
    a = run_bias_experiment(cfg, 4)
    b = run_bias_experiment(cfg, 4, workers=2)
    assert a.as_dict() == b.as_dict()
