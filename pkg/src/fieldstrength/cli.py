"""Command-line entry point: ``fieldstrength <command> [options]``.

Exit codes: 0 success, 2 input error, 3 data validation error, 4 internal
invariant failure. Heavy modules are imported inside the command handlers so
that ``--threads`` can cap the columnar engine before it starts.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .errors import FieldStrengthError, InputError

log = logging.getLogger("fieldstrength")


def _add_window(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", default="2006:2010", help="analysis window START:END (default 2006:2010)")
    p.add_argument("--min-tenure", type=int, default=3, metavar="YEARS",
                   help="minimum years on staff within the window (default 3)")


def _add_inputs(p: argparse.ArgumentParser, *, roster=True, publications=True, links=False) -> None:
    if roster:
        p.add_argument("--roster", required=True, type=Path, help="roster CSV")
    if publications:
        p.add_argument("--publications", required=True, type=Path, help="publications JSON-lines file")
    if links:
        p.add_argument("--links", type=Path, help="authorship links CSV (from 'disambiguate')")
    p.add_argument("--taxonomy", type=Path, help="field taxonomy CSV (default: bundled Italian taxonomy)")


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--thresholds", default="1,5", help="HCA percentile thresholds, comma-separated (default 1,5)")
    p.add_argument("--mode", default="both", help="counting mode: full, fractional or both (default both)")
    p.add_argument("--theta", type=float, default=0.1, help="fractional output bar for a top scientist (default 0.1)")


def _add_common(p: argparse.ArgumentParser, *, out_required=True, fmt=False) -> None:
    p.add_argument("--out", type=Path, required=out_required, help="output directory")
    p.add_argument("--threads", type=int, default=None, help="worker cap (default: all cores)")
    if fmt:
        p.add_argument("--format", dest="fmt", default="csv", help="report format: csv, json or markdown")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fieldstrength", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("generate", help="write a seeded synthetic corpus")
    p.add_argument("--preset", default="default", choices=("default", "gradient", "paired", "scale"))
    p.add_argument("--config", type=Path, help="TOML generator config (overrides --preset)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-publications", type=int, default=1_000_000, help="target size for the scale preset")
    _add_common(p)
    p.set_defaults(handler=cmd_generate)

    p = sub.add_parser("ingest", help="validate inputs and write the filtered roster and publications")
    _add_inputs(p)
    _add_window(p)
    _add_common(p)
    p.set_defaults(handler=cmd_ingest)

    p = sub.add_parser("disambiguate", help="resolve bylines to roster researchers")
    _add_inputs(p)
    _add_window(p)
    p.add_argument("--truth", type=Path, help="ground-truth links CSV to score against")
    _add_common(p)
    p.set_defaults(handler=cmd_disambiguate)

    p = sub.add_parser("hca", help="world percentiles and highly-cited labels")
    p.add_argument("--publications", required=True, type=Path, help="publications JSON-lines file")
    p.add_argument("--thresholds", default="1,5", help="HCA percentile thresholds (default 1,5)")
    _add_window(p)
    _add_common(p)
    p.set_defaults(handler=cmd_hca)

    p = sub.add_parser("topsci", help="per-researcher HCA counts and top-scientist flags")
    _add_inputs(p, links=True)
    _add_window(p)
    _add_scoring(p)
    _add_common(p)
    p.set_defaults(handler=cmd_topsci)

    p = sub.add_parser("rank", help="field and discipline tables from a researcher dump")
    _add_inputs(p, publications=False)
    p.add_argument("--researchers", required=True, type=Path, help="researchers.csv from 'topsci'")
    _add_window(p)
    _add_scoring(p)
    p.add_argument("--tau", type=float, default=0.5, help="field eligibility bar (default 0.5)")
    p.add_argument("--top-n", type=int, default=20)
    _add_common(p, fmt=True)
    p.set_defaults(handler=cmd_rank)

    p = sub.add_parser("correlate", help="Spearman correlation of two field tables")
    p.add_argument("table_a", type=Path)
    p.add_argument("table_b", type=Path)
    _add_common(p, out_required=False, fmt=True)
    p.set_defaults(handler=cmd_correlate)

    p = sub.add_parser("bias-sim", help="paired-field bias experiment on synthetic corpora")
    p.add_argument("--config", type=Path, help="TOML config with exactly two fields")
    p.add_argument("--ratio", default="1:2", help="intensity (or world-staff) ratio low:high (default 1:2)")
    p.add_argument("--vary", default="intensity", choices=("intensity", "world"))
    p.add_argument("--replications", type=int, default=200)
    p.add_argument("--seed", type=int, default=1000)
    p.add_argument("--threshold", type=float, default=1.0)
    p.add_argument("--theta", type=float, default=0.1)
    _add_common(p, out_required=False)
    p.set_defaults(handler=cmd_bias_sim)

    p = sub.add_parser("pipeline", help="run every stage and write the report bundle")
    _add_inputs(p, links=True)
    _add_window(p)
    _add_scoring(p)
    p.add_argument("--tau", type=float, default=0.5, help="field eligibility bar (default 0.5)")
    p.add_argument("--top-n", type=int, default=20)
    p.add_argument("--percentiles", action="store_true", help="also write the per-membership percentile CSV")
    _add_common(p, fmt=True)
    p.set_defaults(handler=cmd_pipeline)
    return parser


# ----------------------------------------------------------------------------- helpers


def _window(args):
    from .corpus import AnalysisWindow

    return AnalysisWindow.parse(args.window, args.min_tenure)


def _taxonomy(args):
    from .corpus import default_taxonomy, load_taxonomy

    return load_taxonomy(args.taxonomy) if args.taxonomy else default_taxonomy()


def _out(args) -> Path:
    try:
        args.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {args.out}: {exc.strerror}") from None
    return args.out


def _write_json(path: Path, obj) -> None:
    from .pipeline import dumps

    path.write_text(dumps(obj), encoding="utf-8")


def _ratio(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise InputError(f"ratio must look like 1:2, got {text!r}") from None
    if lo <= 0 or hi <= 0:
        raise InputError("ratio terms must be positive")
    return lo, hi


# ----------------------------------------------------------------------------- commands


def cmd_generate(args) -> int:
    from . import synth

    if args.config:
        config = synth.load_config(args.config)
    elif args.preset == "gradient":
        config = synth.gradient_config(args.seed)
    elif args.preset == "paired":
        config = synth.paired_config(args.seed)
    elif args.preset == "scale":
        config = synth.scale_config(args.seed, args.n_publications)
    else:
        config = synth.default_config(args.seed)
    syn = synth.generate_corpus(config)
    paths = syn.write(_out(args))
    print(f"wrote {syn.corpus.n_publications} publications and {len(syn.roster_rows)} roster rows to {args.out}")
    log.info("files: %s", ", ".join(p.name for p in paths.values()))
    return 0


def cmd_ingest(args) -> int:
    from .corpus import load_corpus, write_publications, write_roster

    corpus, counts = load_corpus(args.roster, args.publications, args.taxonomy, _window(args))
    out = _out(args)
    write_roster(corpus.roster, out / "roster.csv")
    write_publications(corpus.publications, out / "publications.jsonl")
    _write_json(out / "ingest.json", counts)
    print(json.dumps(counts, sort_keys=True))
    return 0


def cmd_disambiguate(args) -> int:
    from .corpus import load_corpus, read_links, write_links
    from .disambig import resolve, score_links

    corpus, _ = load_corpus(args.roster, args.publications, args.taxonomy, _window(args))
    corpus, diagnostics = resolve(corpus)
    out = _out(args)
    write_links(corpus.links, out / "links.csv")
    if args.truth:
        m = score_links(corpus.links, read_links(args.truth, corpus))
        diagnostics["metrics"] = {k: getattr(m, k) for k in m.__dataclass_fields__}
    _write_json(out / "disambiguation.json", diagnostics)
    print(json.dumps(diagnostics, sort_keys=True))
    return 0


def cmd_hca(args) -> int:
    from .corpus import load_publications
    from .hca import PercentileTable, threshold_label
    from .pipeline import parse_thresholds

    thresholds = parse_thresholds(args.thresholds)
    pubs = load_publications(args.publications, _window(args))
    table = PercentileTable(pubs.items)
    out = _out(args)
    table.dump(thresholds).write_csv(out / "percentiles.csv", float_precision=12)
    summary = {
        "publications": pubs.items.height,
        "excluded_window": pubs.excluded,
        "degenerate_strata": table.degenerate_strata().height,
        **{f"hca_{threshold_label(p)}": len(table.hca(p)) for p in thresholds},
    }
    _write_json(out / "hca.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return 0


def cmd_topsci(args) -> int:
    from .corpus import load_corpus, read_links
    from .disambig import resolve
    from .hca import PercentileTable
    from .pipeline import modes_of, parse_thresholds, table_key
    from .scoring import check_theta, researcher_table, top_scientists

    thresholds = parse_thresholds(args.thresholds)
    modes = modes_of(args.mode)
    theta = check_theta(args.theta)
    corpus, _ = load_corpus(args.roster, args.publications, args.taxonomy, _window(args))
    corpus = corpus.with_links(read_links(args.links, corpus)) if args.links else resolve(corpus)[0]
    table = PercentileTable(corpus.publications)
    hcas = {p: table.hca(p) for p in thresholds}
    out = _out(args)
    researcher_table(corpus, hcas, theta).write_csv(out / "researchers.csv", float_precision=12)
    counts = {table_key(m, p): len(top_scientists(corpus, hcas[p], m, theta)) for m in modes for p in thresholds}
    _write_json(out / "topsci.json", counts)
    print(json.dumps(counts, sort_keys=True))
    return 0


def cmd_rank(args) -> int:
    import polars as pl

    from .analytics import eligible_fields
    from .corpus import PUBLICATION_SCHEMA, Corpus, load_roster
    from .pipeline import RunResult, analyze, modes_of, parse_thresholds
    from .reports import check_format, write_table
    from .scoring import check_theta, ts_from_table

    fmt = check_format(args.fmt)
    thresholds = parse_thresholds(args.thresholds)
    modes = modes_of(args.mode)
    theta = check_theta(args.theta)
    if not 0.0 <= args.tau <= 1.0:
        raise InputError(f"tau must lie in [0, 1], got {args.tau}")
    if not args.researchers.is_file():
        raise InputError(f"researchers file not found: {args.researchers}")
    window, taxonomy = _window(args), _taxonomy(args)
    roster = load_roster(args.roster, window, taxonomy).items
    table = pl.read_csv(args.researchers, schema_overrides={"researcher_id": pl.String, "field_code": pl.String})
    if "n_publications" not in table.columns:
        raise InputError("researchers file lacks the n_publications column")
    corpus = Corpus(window, roster, pl.DataFrame(schema=PUBLICATION_SCHEMA), taxonomy)
    active = set(table.filter(pl.col("n_publications") > 0)["researcher_id"].to_list())
    eligible = eligible_fields(roster, active, args.tau)
    ts_sets = {(m, p): ts_from_table(table, p, m, theta) for m in modes for p in thresholds}
    result = RunResult()
    analyze(corpus, ts_sets, eligible, args.top_n, result)
    out = _out(args)
    for name in sorted(result.tables):
        write_table(result.tables[name], out, fmt)
    print(f"{len(eligible)} eligible fields; {len(result.tables)} tables written to {out}")
    return 0


def cmd_correlate(args) -> int:
    from .analytics import incidence_vector, rank_correlation
    from .pipeline import read_field_table
    from .reports import check_format, correlation_table, render, write_table

    fmt = check_format(args.fmt)
    a = read_field_table(args.table_a)
    b = read_field_table(args.table_b)
    rc = rank_correlation(incidence_vector(a.values()), incidence_vector(b.values()))
    table = correlation_table("correlation", [(args.table_a.stem, args.table_b.stem, rc.n, rc.rho)])
    if args.out:
        write_table(table, _out(args), fmt)
    sys.stdout.write(render(table, fmt))
    return 0


def cmd_bias_sim(args) -> int:
    from . import synth

    if args.replications < 1:
        raise InputError("replications must be at least 1")
    if args.config:
        config = synth.load_config(args.config)
    else:
        lo, hi = _ratio(args.ratio)
        if args.vary == "intensity":
            config = synth.paired_config(args.seed, intensity=(5.0 * lo, 5.0 * hi))
        else:
            config = synth.paired_config(args.seed, multiplier=(4.0 * lo, 4.0 * hi))
    run = synth.run_bias_experiment if args.vary == "intensity" else synth.run_world_ratio_probe
    workers = args.threads or os.cpu_count() or 1
    report = run(config, args.replications, threshold_p=args.threshold, theta=args.theta, workers=workers)
    summary = report.as_dict()
    if args.out:
        _write_json(_out(args) / "bias_report.json", summary)
    brief = {k: summary[k] for k in ("varied", "replications", "incidence_gap_full", "incidence_gap_fractional",
                                     "sign_test_pvalue", "share_fractional_smaller")}
    print(json.dumps(brief, sort_keys=True))
    return 0


def cmd_pipeline(args) -> int:
    from .pipeline import RunConfig, parse_thresholds, run_pipeline

    config = RunConfig(
        roster=args.roster,
        publications=args.publications,
        out_dir=args.out,
        taxonomy=args.taxonomy,
        links=args.links,
        window=_window(args),
        thresholds=parse_thresholds(args.thresholds),
        mode=args.mode,
        theta=args.theta,
        tau=args.tau,
        fmt=args.fmt,
        top_n=args.top_n,
        write_percentiles=args.percentiles,
    )
    result = run_pipeline(config)
    print(f"wrote {len(result.files)} files to {args.out}")
    return 0


# ----------------------------------------------------------------------------- entry point


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.threads is not None:
        if args.threads < 1:
            parser.error("--threads must be at least 1")
        # Only effective when the columnar engine has not been loaded yet.
        os.environ.setdefault("POLARS_MAX_THREADS", str(args.threads))
    try:
        return args.handler(args)
    except FieldStrengthError as exc:
        print(f"fieldstrength: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"fieldstrength: error: {exc}", file=sys.stderr)
        return InputError.exit_code


if __name__ == "__main__":
    sys.exit(main())
