import numpy as np
import pytest

from topcite.corpus import Corpus, DataError, DocType, Entity, PublicationRecord, resolve_entities
from topcite.decompose import category_comparison, collaboration_classes, national_trend
from topcite.percentile import top_class, top_class_threshold
from topcite.synth import load_strata

from conftest import FIXTURES


@pytest.fixture(scope="module")
def table(world):
    return category_comparison(
        world, ["VIR", "ENG_BM", "ENG_MD", "BUS_FIN"], resolve_entities(["CN", "US"])
    )


def test_category_rows(table):
    rows = {r.category: r for r in table.rows}
    vir = rows["VIR"]
    assert (vir.n_total, vir.n_entity1, vir.n_entity2, vir.p_top_1, vir.p_top_2) == (6625, 1387, 2480, 13, 41)
    assert f"{vir.pp_1:.2f}" == "0.94" and f"{vir.pp_2:.2f}" == "1.65"
    assert rows["BUS_FIN"].significant_05
    assert not rows["ENG_MD"].significant_05
    assert [r.category for r in table.rows][-1] == "World"


def test_world_row_has_overlap_note(table):
    world_row = table.rows[-1]
    assert world_row.overlap == 23500
    assert any(f.startswith("World:") for f in table.footnotes)


def test_comparison_errors(world):
    with pytest.raises(DataError, match="category NOPE has no records"):
        category_comparison(world, ["NOPE"], resolve_entities(["CN", "US"]))
    with pytest.raises(ValueError):
        category_comparison(world, ["VIR"], resolve_entities(["CN"]))


def test_z_failure_becomes_note():
    recs = [PublicationRecord(f"r{i}", 2019, DocType.ARTICLE, i, ("AA",), ("X",)) for i in range(100)]
    c = Corpus.from_records(recs)
    tab = category_comparison(c, ["X"], resolve_entities(["AA", "BB"]))
    assert tab.rows[0].z is None
    assert any("z not computed" in f for f in tab.footnotes)


def collab_corpus():
    spec = [
        (("US",), 10), (("CN",), 10), (("DE",), 10), (("US", "CN"), 10),
        (("US", "DE"), 10), (("US", "CN", "DE"), 10), (("JP",), 10), ((), 30),
    ]
    recs, i = [], 0
    for ctry, n in spec:
        for j in range(n):
            cites = 100 + j if len(ctry) >= 2 else j
            recs.append(PublicationRecord(f"r{i}", 2019, DocType.ARTICLE, cites, ctry, ()))
            i += 1
    return Corpus.from_records(recs)


def test_collaboration_classes():
    c = collab_corpus()
    blocs = resolve_entities(["US", "CN", "EU"], {"EU": frozenset({"DE", "FR"})})
    rows = collaboration_classes(c.view(), blocs, k_percent=10)
    labels = [r.label for r in rows]
    assert labels == ["none", "US", "CN", "EU", "US+CN", "US+EU", "US+CN+EU"]
    by = {r.label: r for r in rows}
    assert by["none"].n == 40
    assert sum(r.n for r in rows) == 100
    # three collab classes share citations 100..109, so ties inflate the top class past 10
    t = top_class_threshold(c.view(), 10)
    assert sum(r.p_top for r in rows) == t.actual_size
    for r in rows:
        assert r.pp == pytest.approx(r.p_top / (r.n / 10))


def test_collaboration_rejects_overlapping_blocs():
    c = collab_corpus()
    with pytest.raises(DataError, match="both"):
        collaboration_classes(c.view(), [Entity("A", frozenset({"US"})), Entity("B", frozenset({"US", "CN"}))])


def test_collaboration_uses_given_top_class(world, blocs):
    v = world.default_view()
    top = top_class(v, top_class_threshold(v, 1))
    rows = collaboration_classes(v, resolve_entities(["US", "CN", "EU27"], blocs), top=top)
    assert sum(r.p_top for r in rows) == len(top)
    assert sum(r.n for r in rows) == v.n


def test_national_trend():
    c = load_strata(FIXTURES / "citation_windows.strata.csv")
    pts = national_trend({y: c for y in range(2015, 2020)}, Entity.country("CN"))
    assert [p.cutoff for p in pts] == [140, 115, 93, 67, 38]
    for p in pts:
        assert p.p_top == 1
    with pytest.raises(DataError):
        national_trend({2010: c}, Entity.country("CN"))
