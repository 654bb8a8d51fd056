import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topcite.corpus import DataError, EmptySubsetError, Entity, categories, doctypes, years
from topcite.indicators import (
    CountingMethod,
    PercentileClasses,
    broad_category_labels,
    country_attribution,
    entity_credit_sums,
    entity_size,
    esi_refined_ranks,
    expected_topk,
    i3,
    indicator_reports,
    mncs,
    p_topk,
    pct_i3,
    pp_topk,
    raw_pp_topk,
    rc_scores,
    refined_pp_topk,
)
from topcite.percentile import PercentileScheme, percentile_ranks, top_class, top_class_threshold

from conftest import COUNTRY_POOL, corpora

WHOLE, FRAC = CountingMethod.WHOLE, CountingMethod.FRACTIONAL


def oracle_credit(corpus, rows, entity, m):
    total = Fraction(0)
    for i in rows:
        rec = corpus.record(int(i))
        credit = country_attribution(rec, m)
        if m is WHOLE:
            total += 1 if any(c in entity.codes for c in credit) else 0
        else:
            total += sum((v for c, v in credit.items() if c in entity.codes), Fraction(0))
    return total


def test_country_attribution(small):
    d = small.record(3)
    assert country_attribution(d, "whole") == {"DE": 1, "FR": 1, "US": 1}
    assert country_attribution(d, "fractional") == {c: Fraction(1, 3) for c in ("DE", "FR", "US")}
    assert country_attribution(small.record(4), "fractional") == {}


def test_bloc_credit_counts_each_record_once(small):
    eu = Entity("EU", frozenset({"DE", "FR"}))
    v = small.view()
    assert entity_size(v, eu, WHOLE) == 2  # d and f
    assert entity_size(v, eu, FRAC) == Fraction(2, 3) + 1


@settings(max_examples=40, deadline=None)
@given(corpora(max_size=150), st.sampled_from([WHOLE, FRAC]), st.integers(1, 4))
def test_credit_sums_match_record_oracle(c, m, workers):
    ents = [Entity.country(x) for x in COUNTRY_POOL[:3]] + [Entity("B", frozenset(COUNTRY_POOL[2:5]))]
    rows = c.all_rows
    got = entity_credit_sums(c, rows, ents, m, workers=workers)
    for e, ent in enumerate(ents):
        assert got[0, e] == oracle_credit(c, rows, ent, m)


@settings(max_examples=40, deadline=None)
@given(corpora(max_size=200))
def test_counting_laws(c):
    rows = c.all_rows
    ents = [Entity.country(x) for x in c.countries.vocab]
    frac = entity_credit_sums(c, rows, ents, FRAC)[0]
    whole = entity_credit_sums(c, rows, ents, WHOLE)[0]
    assert all(isinstance(x, Fraction) for x in frac)
    assert sum(frac, Fraction(0)) == int((c.countries.lengths > 0).sum())
    assert all(w >= f for w, f in zip(whole, frac))


def test_expected_and_pp():
    assert expected_topk(504695, 1) == pytest.approx(5046.95)
    assert expected_topk(1000, 0.1) == 1.0
    assert pp_topk(8422, expected_topk(504695)) == pytest.approx(1.66873, abs=1e-5)
    with pytest.raises(DataError):
        pp_topk(1, 0)
    with pytest.raises(DataError):
        expected_topk(-1)


def test_p_topk_fractional(small):
    v = small.view()
    top = top_class(v, top_class_threshold(v, 37.5))
    # rank 3 of 8 lands on the tie at 40, so b and c both join f and a
    assert set(top.ids) == {"f", "a", "b", "c"}
    assert p_topk(v, top, Entity.country("US"), FRAC) == pytest.approx(0.5 + 1)
    assert p_topk(v, top, Entity.country("CN"), WHOLE) == 2


@settings(max_examples=40, deadline=None)
@given(corpora(max_size=300), st.sampled_from(list(PercentileScheme)))
def test_i3_matches_direct_sum(c, scheme):
    v = c.view()
    r = percentile_ranks(v, scheme)
    direct = 0
    for x in r.values:
        direct += math.floor(round(x, 9))
    assert i3(r) == direct == int(r.classes(100).sum())
    ten = sum(10 * math.floor(round(x, 9) / 10) for x in r.values)
    assert i3(r, 10) == ten


def test_i3_custom_classes(small):
    r = percentile_ranks(small.view(), "mid")
    two = PercentileClasses.top_k(25)
    assert i3(r, two) == float((r.values >= 75).sum())
    with pytest.raises(ValueError):
        PercentileClasses((1.0, 2.0), (0.0, 1.0))
    with pytest.raises(ValueError):
        i3(r, 0)


def test_pct_i3():
    assert pct_i3(444624, 1486371) == pytest.approx(29.913, abs=1e-3)
    with pytest.raises(DataError):
        pct_i3(1, 0)


@settings(max_examples=30, deadline=None)
@given(corpora(min_size=10, max_size=300), st.sampled_from([WHOLE, FRAC]), st.sampled_from([1, 10]))
def test_report_rows_are_internally_consistent(c, m, k):
    v = c.view()
    ents = [Entity.country(x) for x in COUNTRY_POOL[:3]]
    res = indicator_reports(v, ents, k, m)
    for rep in (*res.entities, res.world):
        expected = expected_topk(Fraction(rep.n).limit_denominator(10**6), k)
        assert rep.expected == pytest.approx(expected, rel=1e-12)
        if rep.expected > 0:
            assert rep.pp_topk == pytest.approx(rep.p_topk / rep.expected, rel=1e-12)
        assert rep.p_topk <= rep.n
    assert res.world.p_topk == res.threshold.actual_size


def test_full_set_pp_with_nominal_pool_is_one(world):
    v = world.default_view()
    t = top_class_threshold(v, 1)
    assert f"{pp_topk(t.nominal_rank, expected_topk(v.n, 1)):.3f}" == "1.000"


def test_rc_scores_and_mncs(small):
    v = small.filter(years(2019) & doctypes("Article", "Review", "Letter"))
    s = rc_scores(v, "category")
    by_id = {x.record_id: x for x in s}
    assert by_id["a"].rc == pytest.approx(50 / (97 / 3))
    assert by_id["g"].rc == pytest.approx((21 / 97 + 21 / 50) / 2)
    assert by_id["g"].field_key == "VIR|ENG" or by_id["g"].field_key == "ENG|VIR"
    assert "h" not in by_id  # no category
    vir = v.refine(categories("VIR"))
    assert mncs(s, vir) == pytest.approx(float(np.mean([by_id[i].rc for i in ("a", "b", "g")])))
    with pytest.raises(EmptySubsetError):
        mncs(s, v.refine(years(1990)))


def test_rc_zero_stratum_rejected(small):
    with pytest.raises(DataError, match="BUS/2018 has zero mean"):
        rc_scores(small.default_view())


def test_rc_year_strata_labels(small):
    s = rc_scores(small.filter(years(2019)), "category+year+doctype")
    assert "VIR/2019/Article" in s.stratum_labels


def test_mncs_column(world):
    res = indicator_reports(world.default_view().refine(categories("VIR")), [Entity.country("CN")], with_mncs=True)
    assert res.world.mncs == pytest.approx(1.0)


def test_refined_means_are_one(small):
    v = small.filter(categories("VIR", "BUS") & ~categories("ENG"))
    r = percentile_ranks(v, "mid")
    ref = esi_refined_ranks(r)
    for lab in set(ref.labels):
        assert ref.scores[ref.labels == lab].mean() == pytest.approx(1.0)


def test_broad_labels(small):
    rows = small.filter(categories("VIR", "ENG")).rows
    with pytest.raises(DataError, match="2 broad categories"):
        broad_category_labels(small, rows)
    labels = broad_category_labels(small, rows, {"VIR": "LIFE", "ENG": "LIFE"})
    assert set(labels) == {"LIFE"}


def test_refined_equals_raw_within_one_category(world):
    v = world.default_view().refine(categories("ENG_MD"))
    ref = esi_refined_ranks(percentile_ranks(v, "mid"))
    for code in ("CN", "US"):
        ent = Entity.country(code)
        assert refined_pp_topk(v, ref, ent) == pytest.approx(raw_pp_topk(v, ent))
    assert refined_pp_topk(v, ref, Entity.country("ZZ")) == 0.0
