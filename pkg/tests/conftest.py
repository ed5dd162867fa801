from __future__ import annotations

import sys
from pathlib import Path

import pytest

from fieldstrength.corpus import (
    AnalysisWindow,
    Corpus,
    Publication,
    Researcher,
    build_corpus,
    default_taxonomy,
    links_from_set,
    AuthorshipLink,
)

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"
WINDOW = AnalysisWindow(2006, 2010, 3)


@pytest.fixture(scope="session")
def taxonomy():
    return default_taxonomy()


def researcher(rid, surname, given, field="FIS/01", inst="UNIV-001", tenure=5, taxonomy=None):
    tax = taxonomy or default_taxonomy()
    return Researcher(rid, surname, tuple(given.split()), field, tax.discipline_of(field), inst, tenure)


def pub(pid, year=2008, cats=("C1",), cites=0, authors=("Rossi, M.",), affs=()):
    return Publication(pid, year, tuple(cats), cites, tuple(authors), tuple(affs))


def make_corpus(roster, pubs, links=None) -> Corpus:
    """Corpus from record lists; ``links`` is a list of (pub_id, byline_index, researcher_id)."""
    corpus = build_corpus(WINDOW, roster, pubs, default_taxonomy())
    if links is not None:
        n_auth = dict(zip(corpus.publications["publication_id"], corpus.publications["author_count_total"]))
        recs = [AuthorshipLink(p, b, r, int(n_auth[p])) for p, b, r in links]
        corpus = corpus.with_links(links_from_set(recs, corpus))
    return corpus


@pytest.fixture(scope="session")
def default_synth():
    from fieldstrength.synth import default_config, generate_corpus

    return generate_corpus(default_config())


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance verdict: ``criterion(n, passed, detail)``."""

    def record(number: int, passed: bool, detail: str) -> bool:
        ACCEPTANCE[number] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
