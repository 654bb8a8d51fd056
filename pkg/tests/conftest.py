from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

from topcite.corpus import Corpus, DocType, PublicationRecord

FIXTURES = Path(__file__).parent / "fixtures"

# filled by test_acceptance.py, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []

COUNTRY_POOL = ("CN", "US", "DE", "FR", "GB", "JP")
CATEGORY_POOL = ("VIR", "ENG", "BUS")


def skewed_citations(rng, n):
    """Lognormal-ish counts with a zero spike and heavy ties."""
    c = np.floor(np.exp(rng.normal(1.5, 1.3, n))).astype(np.int64)
    c[rng.random(n) < 0.15] = 0
    return c


def random_corpus(rng, n, with_other=False) -> Corpus:
    cites = skewed_citations(rng, n)
    recs = []
    for i in range(n):
        k = int(rng.integers(0, 4))
        ctry = tuple(rng.choice(COUNTRY_POOL, size=k, replace=False)) if k else ()
        cats = tuple(rng.choice(CATEGORY_POOL, size=int(rng.integers(1, 3)), replace=False))
        dt = DocType.OTHER if with_other and rng.random() < 0.05 else DocType.ARTICLE
        recs.append(PublicationRecord(f"p{i}", int(rng.choice([2018, 2019])), dt, int(cites[i]), ctry, cats))
    return Corpus.from_records(recs)


@st.composite
def corpora(draw, min_size=1, max_size=300):
    n = draw(st.integers(min_size, max_size))
    seed = draw(st.integers(0, 2**32 - 1))
    return random_corpus(np.random.default_rng(seed), n)


@pytest.fixture(scope="session")
def world():
    from topcite.synth import load_strata

    return load_strata(FIXTURES / "world_2019.strata.csv")


@pytest.fixture(scope="session")
def blocs():
    from topcite.corpus import load_bloc_mapping

    return load_bloc_mapping(FIXTURES / "blocs.csv")


@pytest.fixture
def small():
    recs = [
        PublicationRecord("a", 2019, DocType.ARTICLE, 50, ("CN",), ("VIR",)),
        PublicationRecord("b", 2019, DocType.ARTICLE, 40, ("CN", "US"), ("VIR",)),
        PublicationRecord("c", 2019, DocType.REVIEW, 40, ("US",), ("ENG",)),
        PublicationRecord("d", 2019, DocType.LETTER, 3, ("DE", "FR", "US"), ("ENG",)),
        PublicationRecord("e", 2018, DocType.ARTICLE, 0, (), ("BUS",)),
        PublicationRecord("f", 2019, DocType.OTHER, 99, ("DE",), ("BUS",)),
        PublicationRecord("g", 2019, DocType.ARTICLE, 7, ("GB",), ("VIR", "ENG")),
        PublicationRecord("h", 2019, DocType.ARTICLE, 7, ("CN",), ()),
    ]
    return Corpus.from_records(recs, label="small")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
