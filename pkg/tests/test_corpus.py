import json

import polars as pl
import pytest

from fieldstrength.corpus import (
    AnalysisWindow,
    AuthorshipLink,
    Publication,
    build_corpus,
    corpus_summary,
    default_taxonomy,
    load_publications,
    load_roster,
    load_taxonomy,
    read_links,
    write_links,
    write_publications,
    write_roster,
)
from fieldstrength.errors import DataValidationError, InputError

from conftest import WINDOW, make_corpus, pub, researcher

HEADER = "researcher_id,surname,given_names,field_code,institution_id,tenure_years\n"


def _roster_file(tmp_path, rows):
    path = tmp_path / "roster.csv"
    path.write_text(HEADER + "".join(r + "\n" for r in rows), encoding="utf-8")
    return path


def _jsonl(tmp_path, records, name="pubs.jsonl"):
    path = tmp_path / name
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


def _rec(pid="P1", year=2008, cites=3, cats=("C1",), authors=("Rossi, M.",)):
    return {"id": pid, "year": year, "categories": list(cats), "citations": cites, "authors": list(authors),
            "affiliations": []}


class TestWindow:
    def test_parse(self):
        w = AnalysisWindow.parse("2006:2010")
        assert (w.start_year, w.end_year, w.length) == (2006, 2010, 5)
        assert 2006 in w and 2010 in w and 2005 not in w

    @pytest.mark.parametrize("text", ["2006-2010", "x:y", "2006"])
    def test_parse_rejects(self, text):
        with pytest.raises(InputError):
            AnalysisWindow.parse(text)

    def test_reversed_window(self):
        with pytest.raises(InputError):
            AnalysisWindow(2010, 2006)

    def test_tenure_longer_than_window(self):
        with pytest.raises(InputError):
            AnalysisWindow(2006, 2007, 3)


class TestRoster:
    def test_three_valid_rows(self, tmp_path, taxonomy):
        path = _roster_file(tmp_path, [
            "R1,Rossi,Mario,FIS/01,U1,5", "R2,Bianchi,Luca,FIS/01,U1,4", "R3,Verdi,Anna,GEO/03,U2,3",
        ])
        loaded = load_roster(path, WINDOW, taxonomy)
        assert len(loaded.items) == 3 and loaded.excluded == 0
        assert loaded.items[2].discipline_code == "EAR"

    def test_short_tenure_excluded(self, tmp_path, taxonomy):
        loaded = load_roster(_roster_file(tmp_path, ["R1,Rossi,Mario,FIS/01,U1,2"]), WINDOW, taxonomy)
        assert loaded.items == () and loaded.excluded == 1

    def test_duplicate_id_named(self, tmp_path, taxonomy):
        path = _roster_file(tmp_path, ["R1,Rossi,Mario,FIS/01,U1,5", "R1,Bianchi,Luca,FIS/01,U1,5"])
        with pytest.raises(DataValidationError, match="'R1'") as err:
            load_roster(path, WINDOW, taxonomy)
        assert err.value.line == 3

    def test_unknown_field_named(self, tmp_path, taxonomy):
        path = _roster_file(tmp_path, ["R1,Rossi,Mario,XYZ/99,U1,5"])
        with pytest.raises(DataValidationError, match="XYZ/99"):
            load_roster(path, WINDOW, taxonomy)

    @pytest.mark.parametrize("row", ["R1,Rossi,Mario,FIS/01,U1", "R1,Rossi,Mario,FIS/01,U1,five", "R1,Rossi,M,FIS/01,U1,-1"])
    def test_malformed_row_has_line_number(self, tmp_path, taxonomy, row):
        path = _roster_file(tmp_path, ["R0,Verdi,Anna,FIS/01,U1,5", row])
        with pytest.raises(DataValidationError) as err:
            load_roster(path, WINDOW, taxonomy)
        assert err.value.line == 3
        assert ":3:" in str(err.value)

    def test_bad_header(self, tmp_path, taxonomy):
        path = tmp_path / "r.csv"
        path.write_text("id,name\n", encoding="utf-8")
        with pytest.raises(DataValidationError):
            load_roster(path, WINDOW, taxonomy)

    def test_missing_file(self, tmp_path, taxonomy):
        with pytest.raises(InputError, match="nope.csv"):
            load_roster(tmp_path / "nope.csv", WINDOW, taxonomy)

    def test_raising_min_tenure_never_grows_roster(self, tmp_path, taxonomy):
        rows = [f"R{i},S{i},G,FIS/01,U1,{i % 6}" for i in range(30)]
        path = _roster_file(tmp_path, rows)
        sizes = [len(load_roster(path, AnalysisWindow(2006, 2010, m), taxonomy).items) for m in range(1, 6)]
        assert sizes == sorted(sizes, reverse=True)

    def test_roundtrip(self, tmp_path, taxonomy):
        roster = [researcher("R1", "D'Amico", "Gian Luca"), researcher("R2", "Müller", "Jürgen", "GEO/03")]
        write_roster(roster, tmp_path / "r.csv")
        assert load_roster(tmp_path / "r.csv", WINDOW, taxonomy).items == tuple(roster)


class TestPublications:
    def test_window_filter(self, tmp_path):
        path = _jsonl(tmp_path, [_rec("P1", 2008), _rec("P2", 2005), _rec("P3", 2011)])
        loaded = load_publications(path, WINDOW)
        assert loaded.items["publication_id"].to_list() == ["P1"]
        assert loaded.excluded == 2

    def test_author_count(self, tmp_path):
        path = _jsonl(tmp_path, [_rec(authors=("A, B.", "C, D.", "E, F."))])
        assert load_publications(path, WINDOW).items["author_count_total"].to_list() == [3]

    @pytest.mark.parametrize(
        "bad, message",
        [
            ({"citations": -1}, "negative citation"),
            ({"categories": []}, "empty categories"),
            ({"authors": []}, "empty authors"),
            ({"id": ""}, "missing id"),
        ],
    )
    def test_invalid_row_reports_line(self, tmp_path, bad, message):
        rec = _rec("P2")
        rec.update(bad)
        path = _jsonl(tmp_path, [_rec("P1"), rec])
        with pytest.raises(DataValidationError, match=message) as err:
            load_publications(path, WINDOW)
        assert err.value.line == 2

    def test_blank_lines_do_not_shift_line_numbers(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text(json.dumps(_rec("P1")) + "\n\n" + json.dumps(_rec("P2", cites=-1)) + "\n", encoding="utf-8")
        with pytest.raises(DataValidationError) as err:
            load_publications(path, WINDOW)
        assert err.value.line == 3

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text(json.dumps(_rec("P1")) + "\n{not json\n", encoding="utf-8")
        with pytest.raises(DataValidationError, match="invalid JSON") as err:
            load_publications(path, WINDOW)
        assert err.value.line == 2

    def test_wrong_type(self, tmp_path):
        rec = _rec("P1")
        rec["year"] = "2008"
        path = _jsonl(tmp_path, [rec])
        with pytest.raises(DataValidationError, match="year"):
            load_publications(path, WINDOW)

    def test_duplicate_id(self, tmp_path):
        path = _jsonl(tmp_path, [_rec("P1"), _rec("P1")])
        with pytest.raises(DataValidationError, match="P1"):
            load_publications(path, WINDOW)

    def test_duplicate_categories_collapse(self, tmp_path):
        path = _jsonl(tmp_path, [_rec(cats=("C1", "C2", "C1"))])
        assert load_publications(path, WINDOW).items["categories"].to_list() == [["C1", "C2"]]

    def test_empty_file(self, tmp_path):
        path = tmp_path / "p.jsonl"
        path.write_text("", encoding="utf-8")
        loaded = load_publications(path, WINDOW)
        assert loaded.items.height == 0 and loaded.excluded == 0

    def test_deterministic_and_roundtrip(self, tmp_path):
        recs = [_rec(f"P{i}", 2006 + i % 5, i, ("C1", "C2")[: 1 + i % 2]) for i in range(20)]
        path = _jsonl(tmp_path, recs)
        a = load_publications(path, WINDOW).items
        assert a.equals(load_publications(path, WINDOW).items)
        write_publications(a, tmp_path / "again.jsonl")
        assert load_publications(tmp_path / "again.jsonl", WINDOW).items.equals(a)

    def test_record_invariants(self):
        with pytest.raises(DataValidationError):
            Publication("P", 2008, (), 0, ("A",))
        with pytest.raises(DataValidationError):
            Publication("P", 2008, ("C",), -1, ("A",))
        with pytest.raises(DataValidationError):
            Publication("P", 2008, ("C",), 0, ())


class TestCorpus:
    def test_build_rejects_out_of_window(self):
        with pytest.raises(DataValidationError):
            build_corpus(WINDOW, [], [pub("P1", year=2005)], default_taxonomy())

    def test_build_rejects_short_tenure(self):
        with pytest.raises(DataValidationError):
            build_corpus(WINDOW, [researcher("R1", "Rossi", "Mario", tenure=2)], [], default_taxonomy())

    def test_links_roundtrip(self, tmp_path):
        roster = [researcher("R1", "Rossi", "Mario"), researcher("R2", "Bianchi", "Luca")]
        pubs = [pub("P1", authors=("Rossi, M.", "Bianchi, L.")), pub("P2")]
        corpus = make_corpus(roster, pubs, [("P1", 0, "R1"), ("P1", 1, "R2"), ("P2", 0, "R1")])
        write_links(corpus.links, tmp_path / "links.csv")
        again = read_links(tmp_path / "links.csv", corpus)
        assert again.equals(corpus.links)
        assert AuthorshipLink("P1", 1, "R2", 2) in corpus.link_set()

    def test_taxonomy_bundled(self, taxonomy):
        assert len(taxonomy.field_to_discipline) == 370
        assert taxonomy.discipline_of("GEO/03") == "EAR"
        assert taxonomy.discipline_of("M-PSI/05") == "HPP"

    def test_taxonomy_missing_file(self, tmp_path):
        with pytest.raises(InputError):
            load_taxonomy(tmp_path / "none.csv")


class TestSummary:
    def test_empty_corpus(self):
        from fieldstrength.hca import HcaSet

        corpus = make_corpus([researcher("R1", "Rossi", "Mario")], [], [])
        empty = HcaSet.__new__(HcaSet)
        object.__setattr__(empty, "mask", [])
        report = corpus_summary(corpus, {1.0: empty})
        (row,) = report.rows
        assert (row.publications, row.hca_counts[1.0]) == (0, 0)
        assert row.hca_share(1.0) is None
        assert row.hca_cell(1.0) == "0"

    def test_one_in_ten_flagged(self):
        from fieldstrength.hca import PercentileTable

        roster = [researcher("R1", "Verdi", "Anna", "GEO/03")]
        # one stratum of 10 with a unique top paper: percentile 0 for it, >= 10 for the rest
        pubs = [pub(f"P{i}", cites=i, authors=("Verdi, A.",)) for i in range(10)]
        corpus = make_corpus(roster, pubs, [(f"P{i}", 0, "R1") for i in range(10)])
        table = PercentileTable.from_publications(corpus.publications)
        report = corpus_summary(corpus, {1.0: table.hca(1.0)})
        (row,) = report.rows
        assert row.publications == 10
        assert row.hca_cell(1.0) == "1 (10.0%)"

    def test_cross_discipline_counted_once_in_total(self):
        roster = [researcher("R1", "Rossi", "Mario", "FIS/01"), researcher("R2", "Verdi", "Anna", "GEO/03")]
        pubs = [pub("P1", authors=("Rossi, M.", "Verdi, A.")), pub("P2", authors=("Verdi, A.",))]
        corpus = make_corpus(roster, pubs, [("P1", 0, "R1"), ("P1", 1, "R2"), ("P2", 0, "R2")])
        report = corpus_summary(corpus)
        per = {r.discipline_code: r.publications for r in report.rows}
        assert per == {"PHY": 1, "EAR": 2}
        assert report.total.publications == 2
        assert report.total.staff == sum(r.staff for r in report.rows) == 2
