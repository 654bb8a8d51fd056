"""Percentile-based indicators and the mean-based baselines they replace.

Top-k% participation (P, expected, PP), the integrated impact indicator
(I3, %I3), relative citation scores (RC/MNCS), and the refined variant that
divides percentile ranks by a broad-category mean.  Entity credits are
accumulated as exact integers (whole counting) or exact rationals
(fractional counting), so totals do not depend on summation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Mapping, Sequence

import numpy as np

from . import _kernels
from .corpus import (
    Corpus,
    CorpusView,
    DataError,
    DocType,
    EmptySubsetError,
    Entity,
    PublicationRecord,
)
from .percentile import (
    PercentileScheme,
    RankAssignment,
    Threshold,
    TopClass,
    as_fraction,
    percentile_ranks,
    top_by_score,
    top_class,
    top_class_threshold,
)


class CountingMethod(str, Enum):
    WHOLE = "whole"
    FRACTIONAL = "fractional"


def country_attribution(
    r: PublicationRecord, m: CountingMethod | str = CountingMethod.WHOLE
) -> dict[str, Fraction]:
    m = CountingMethod(m)
    if not r.countries:
        return {}
    share = Fraction(1) if m is CountingMethod.WHOLE else Fraction(1, len(r.countries))
    return {c: share for c in r.countries}


# --------------------------------------------------------------------------
# Exact entity credit sums


def _member_matrix(corpus: Corpus, entities: Sequence[Entity]) -> np.ndarray:
    mat = np.zeros((len(entities), len(corpus.countries.vocab)), dtype=np.uint8)
    for e, ent in enumerate(entities):
        mat[e] = corpus.countries.member_vector(ent.codes)
    return mat


def entity_credit_sums(
    corpus: Corpus,
    rows: np.ndarray,
    entities: Sequence[Entity],
    method: CountingMethod | str = CountingMethod.WHOLE,
    weights: np.ndarray | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Weighted entity credit totals over ``rows`` as an object array of Fractions.

    ``weights`` has shape (V, len(corpus)) of non-negative integers (default: a
    single row of ones); the result has shape (V, len(entities)).  A record
    contributes ``weight * credit`` where credit is 1 (whole) or
    ``members / len(countries)`` (fractional; ``members`` counts the entity's
    countries on the byline).
    """
    method = CountingMethod(method)
    if weights is None:
        weights = np.ones((1, len(corpus)), dtype=np.int64)
    weights = np.ascontiguousarray(np.atleast_2d(weights), dtype=np.int64)
    if not entities:
        return np.empty((weights.shape[0], 0), dtype=object)
    cl = corpus.countries
    whole, frac = _kernels.chunked(
        "entity_sums",
        np.asarray(rows, dtype=np.int64),
        weights,
        cl.ptr,
        cl.idx,
        _member_matrix(corpus, entities),
        cl.max_length,
        workers=workers,
    )
    out = np.empty(whole.shape, dtype=object)
    for v in range(whole.shape[0]):
        for e in range(whole.shape[1]):
            if method is CountingMethod.WHOLE:
                out[v, e] = Fraction(int(whole[v, e]))
            else:
                out[v, e] = sum(
                    (Fraction(int(x), d) for d, x in enumerate(frac[v, e]) if x),
                    Fraction(0),
                )
    return out


def entity_size(
    v: CorpusView, entity: Entity, m: CountingMethod | str = CountingMethod.WHOLE
) -> Fraction:
    """Number of records of ``v`` credited to ``entity`` (fractional under fractional counting)."""
    return entity_credit_sums(v.corpus, v.rows, [entity], m)[0, 0]


def p_topk(
    v: CorpusView,
    members: TopClass,
    entity: Entity,
    m: CountingMethod | str = CountingMethod.WHOLE,
    workers: int = 1,
) -> float:
    """Entity credit summed over the records of ``v`` that are in ``members``."""
    rows = v.rows[members.contains_rows(v.rows)]
    return float(entity_credit_sums(v.corpus, rows, [entity], m, workers=workers)[0, 0])


def expected_topk(n, k_percent=1) -> float:
    if n < 0:
        raise DataError("negative set size")
    return float(Fraction(n) * as_fraction(k_percent) / 100)


def pp_topk(observed: float, expected: float) -> float:
    if expected <= 0:
        raise DataError("expected value must be positive")
    return observed / expected


# --------------------------------------------------------------------------
# I3


@dataclass(frozen=True)
class PercentileClasses:
    """User-defined rank classes: ``edges`` are ascending lower bounds (first 0)."""

    edges: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.values) or not self.edges:
            raise ValueError("edges and values must be non-empty and equally long")
        if self.edges[0] != 0 or list(self.edges) != sorted(self.edges):
            raise ValueError("edges must ascend from 0")

    @classmethod
    def top_k(cls, k_percent=1) -> "PercentileClasses":
        """Two classes: rank >= 100-k scores 1, everything else 0."""
        return cls((0.0, 100.0 - float(k_percent)), (0.0, 1.0))

    def assign(self, ranks: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.edges), ranks, side="right") - 1


def i3(ranks: RankAssignment, classes: int | PercentileClasses = 100):
    """Integrated impact: sum over rank classes of class value times frequency.

    With an integer ``classes`` C the classes are equal-width and the class
    value is its lower percentile bound ``i * 100 / C``; for C=100 this is the
    sum of floored ranks and is returned as an exact int.
    """
    if len(ranks) == 0:
        return 0
    if isinstance(classes, PercentileClasses):
        cls_idx = classes.assign(ranks.values)
        freq = np.bincount(cls_idx, minlength=len(classes.values))
        return float(math.fsum(f * x for f, x in zip(freq, classes.values)))
    c = int(classes)
    if c < 1:
        raise ValueError("need at least one class")
    freq = np.bincount(ranks.classes(c), minlength=c)
    total = sum(int(f) * i for i, f in enumerate(freq))
    if 100 % c == 0:
        return total * (100 // c)
    return float(Fraction(total * 100, c))


def pct_i3(i3_subset: float, i3_reference: float) -> float:
    if i3_reference == 0:
        raise DataError("reference I3 is zero")
    return 100.0 * i3_subset / i3_reference


# --------------------------------------------------------------------------
# Indicator reports


@dataclass(frozen=True)
class IndicatorReport:
    label: str
    n: float
    p_topk: float
    expected: float
    pp_topk: float
    i3: float
    pct_i3: float
    mncs: float | None = None


@dataclass(frozen=True)
class IndicatorResult:
    world: IndicatorReport
    entities: tuple[IndicatorReport, ...]
    threshold: Threshold
    counting: CountingMethod
    k_percent: float


def indicator_reports(
    v: CorpusView,
    entities: Sequence[Entity],
    k_percent=1,
    m: CountingMethod | str = CountingMethod.WHOLE,
    scheme: PercentileScheme | str = PercentileScheme.STRICT_BELOW,
    with_mncs: bool = False,
    workers: int = 1,
) -> IndicatorResult:
    """N, P-top-k%, expected, PP-top-k%, I3 and %I3 for each entity and the world.

    The reference set is ``v`` itself.  World P counts the whole (possibly
    tie-inflated) top class, so world PP can exceed 1 when ties straddle the
    cutoff.  I3 uses rank classes floored to integers (C=100).
    """
    m = CountingMethod(m)
    t = top_class_threshold(v, k_percent, workers=workers)
    top = top_class(v, t)
    ranks = percentile_ranks(v, scheme)
    corpus = v.corpus
    weights = np.zeros((3, len(corpus)), dtype=np.int64)
    weights[0, v.rows] = 1
    weights[1, top.rows] = 1
    weights[2, v.rows] = ranks.classes(100)
    sums = entity_credit_sums(corpus, v.rows, entities, m, weights, workers=workers)
    world_i3 = int(weights[2, v.rows].sum())

    scores = None
    if with_mncs:
        try:
            scores = rc_scores(v)
        except DataError:
            scores = None

    world = IndicatorReport(
        label="World",
        n=float(v.n),
        p_topk=float(t.actual_size),
        expected=expected_topk(v.n, k_percent),
        pp_topk=pp_topk(t.actual_size, expected_topk(v.n, k_percent)),
        i3=float(world_i3),
        pct_i3=100.0 if world_i3 else float("nan"),
        mncs=mncs(scores) if scores is not None and len(scores) else None,
    )
    reports = []
    for e, ent in enumerate(entities):
        n_e, p_e, i3_e = sums[0, e], sums[1, e], sums[2, e]
        expected = expected_topk(n_e, k_percent)
        ent_mncs = None
        if scores is not None:
            sel = corpus.countries.any_in(ent.codes, scores.rows)
            ent_mncs = float(scores.rc[sel].mean()) if sel.any() else None
        reports.append(
            IndicatorReport(
                label=ent.name,
                n=float(n_e),
                p_topk=float(p_e),
                expected=expected,
                pp_topk=pp_topk(float(p_e), expected) if expected > 0 else 0.0,
                i3=float(i3_e),
                pct_i3=pct_i3(float(i3_e), world_i3) if world_i3 else float("nan"),
                mncs=ent_mncs,
            )
        )
    return IndicatorResult(world, tuple(reports), t, m, float(k_percent))


# --------------------------------------------------------------------------
# RC / MNCS


class Stratification(str, Enum):
    CATEGORY = "category"
    CATEGORY_YEAR = "category+year"
    CATEGORY_YEAR_DOCTYPE = "category+year+doctype"


@dataclass(frozen=True)
class RcScore:
    record_id: str
    field_key: str
    rc: float


@dataclass(frozen=True, eq=False)
class RcScores:
    """Relative citation scores of the categorised records of a view."""

    corpus: Corpus
    rows: np.ndarray
    rc: np.ndarray
    stratum_labels: tuple[str, ...]
    stratum_means: np.ndarray
    entry_ptr: np.ndarray
    entry_stratum: np.ndarray

    def __len__(self) -> int:
        return len(self.rows)

    def field_key(self, j: int) -> str:
        lo, hi = self.entry_ptr[j], self.entry_ptr[j + 1]
        return "|".join(self.stratum_labels[s] for s in self.entry_stratum[lo:hi])

    def __iter__(self) -> Iterator[RcScore]:
        for j, (i, r) in enumerate(zip(self.rows, self.rc)):
            yield RcScore(str(self.corpus.ids[i]), self.field_key(j), float(r))


def _stratum_label(corpus: Corpus, parts: Sequence[int], strat: Stratification) -> str:
    label = [corpus.categories.vocab[parts[0]]]
    if strat is not Stratification.CATEGORY:
        label.append(str(parts[1]))
    if strat is Stratification.CATEGORY_YEAR_DOCTYPE:
        label.append(list(DocType)[parts[2]].value)
    return "/".join(label)


def rc_scores(
    v: CorpusView, stratification: Stratification | str = Stratification.CATEGORY_YEAR
) -> RcScores:
    """Citations divided by the mean citations of the record's field stratum.

    Records in several categories get the mean of their per-category RCs;
    records without categories get no score.
    """
    strat = Stratification(stratification)
    corpus = v.corpus
    owner, cat, lens = corpus.categories.entries(v.rows)
    if len(cat) == 0:
        raise EmptySubsetError("no categorised records to normalise")
    rows_e = v.rows[owner]
    cols = [cat]
    if strat is not Stratification.CATEGORY:
        cols.append(corpus.years[rows_e])
    if strat is Stratification.CATEGORY_YEAR_DOCTYPE:
        cols.append(corpus.doctypes[rows_e].astype(np.int64))
    keys = np.stack(cols, axis=1)
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.ravel()
    cites = corpus.citations[rows_e]
    sums = np.bincount(inv, weights=cites, minlength=len(uniq))
    counts = np.bincount(inv, minlength=len(uniq))
    labels = [_stratum_label(corpus, tuple(int(x) for x in u), strat) for u in uniq]
    for s, total in enumerate(sums):
        if total == 0:
            raise DataError(f"stratum {labels[s]} has zero mean citations")
    means = sums / counts
    rc_e = cites / means[inv]
    has = lens > 0
    per_rec = np.bincount(owner, weights=rc_e, minlength=len(v.rows))[has] / lens[has]
    entry_ptr = np.concatenate([[0], np.cumsum(lens[has])]).astype(np.int64)
    return RcScores(corpus, v.rows[has], per_rec, tuple(labels), means, entry_ptr, inv)


def mncs(scores: RcScores, subset: CorpusView | None = None) -> float:
    """Mean RC over ``scores`` (optionally only the records in ``subset``)."""
    rc = scores.rc
    if subset is not None:
        rc = rc[subset.contains_rows(scores.rows)]
    if len(rc) == 0:
        raise EmptySubsetError("empty subset: no MNCS")
    return float(math.fsum(rc) / len(rc))


# --------------------------------------------------------------------------
# Refined percentile scores


@dataclass(frozen=True, eq=False)
class RefinedScores:
    corpus: Corpus
    rows: np.ndarray
    scores: np.ndarray
    labels: np.ndarray
    category_means: Mapping[str, float]

    def __len__(self) -> int:
        return len(self.rows)


def broad_category_labels(
    corpus: Corpus, rows: np.ndarray, mapping: Mapping[str, str] | None = None
) -> np.ndarray:
    """One broad-category label per record: its category, mapped through ``mapping``.

    Records whose categories map to zero or several broad categories are rejected.
    """
    cats = corpus.categories
    rows = np.asarray(rows, dtype=np.int64)
    lens = cats.lengths[rows]
    mapped = np.array([mapping.get(c, c) if mapping else c for c in cats.vocab] or [""], dtype=object)
    if len(rows) and (lens == 1).all():
        return mapped[cats.idx[cats.ptr[rows]]]
    out = np.empty(len(rows), dtype=object)
    for j, i in enumerate(rows):
        broad = {mapped[q] for q in cats.idx[cats.ptr[i] : cats.ptr[i + 1]]}
        if len(broad) != 1:
            raise DataError(
                f"record {corpus.ids[i]} maps to {len(broad)} broad categories; need exactly one"
            )
        out[j] = broad.pop()
    return out


def esi_refined_ranks(ranks: RankAssignment, broad: Sequence | Mapping[str, str] | None = None) -> RefinedScores:
    """Each rank divided by the mean rank of the record's broad category.

    ``broad`` is either labels aligned with ``ranks.rows`` or a mapping from
    category code to broad category (``None``: each category is its own).
    """
    if broad is None or isinstance(broad, Mapping):
        labels = broad_category_labels(ranks.corpus, ranks.rows, broad)
    else:
        labels = np.asarray(broad, dtype=object)
        if len(labels) != len(ranks):
            raise ValueError("one broad category label per ranked record required")
    values = ranks.values
    uniq, inv = np.unique(labels.astype(str), return_inverse=True)
    inv = inv.ravel()
    sums = np.bincount(inv, weights=values, minlength=len(uniq))
    counts = np.bincount(inv, minlength=len(uniq))
    means = sums / counts
    for lab, mu in zip(uniq, means):
        if mu == 0:
            raise DataError(f"broad category {lab} has mean percentile rank 0")
    return RefinedScores(
        ranks.corpus,
        ranks.rows,
        values / means[inv],
        labels,
        {str(lab): float(mu) for lab, mu in zip(uniq, means)},
    )


def refined_top_rows(refined: RefinedScores, v: CorpusView | None, k_percent=1) -> tuple[np.ndarray, np.ndarray]:
    """Reference rows (refined records in ``v``) and the rows of their refined top-k% class."""
    sel = v.contains_rows(refined.rows) if v is not None else np.ones(len(refined), bool)
    rows = refined.rows[sel]
    _, _, mask = top_by_score(refined.scores[sel], k_percent)
    return rows, rows[mask]


def refined_pp_topk(
    v: CorpusView | None,
    refined: RefinedScores,
    entity: Entity,
    k_percent=1,
    m: CountingMethod | str = CountingMethod.WHOLE,
) -> float:
    """PP-top-k% with the top class chosen by refined score instead of citations."""
    rows, top_rows = refined_top_rows(refined, v, k_percent)
    sums = entity_credit_sums(refined.corpus, rows, [entity], m)[0, 0]
    if sums == 0:
        return 0.0
    observed = entity_credit_sums(refined.corpus, top_rows, [entity], m)[0, 0]
    return pp_topk(float(observed), expected_topk(sums, k_percent))


def raw_pp_topk(
    v: CorpusView, entity: Entity, k_percent=1, m: CountingMethod | str = CountingMethod.WHOLE
) -> float:
    """PP-top-k% of ``entity`` against the citation top class of ``v``."""
    t = top_class_threshold(v, k_percent)
    rows = v.rows[v.citations >= t.citation_cutoff]
    size = entity_size(v, entity, m)
    if size == 0:
        return 0.0
    observed = entity_credit_sums(v.corpus, rows, [entity], m)[0, 0]
    return pp_topk(float(observed), expected_topk(size, k_percent))
