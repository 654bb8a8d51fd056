"""Subset comparisons: per-category country pairs, collaboration classes, trends."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import _kernels
from .corpus import (
    DEFAULT_DOCTYPES,
    CategoryIn,
    Corpus,
    CorpusView,
    DataError,
    DoctypeIn,
    Entity,
    YearIn,
)
from .indicators import CountingMethod, entity_credit_sums, expected_topk
from .percentile import Threshold, TopClass, top_class, top_class_threshold
from .stats import z_two_proportions


@dataclass(frozen=True)
class Participation:
    """Entity sizes and top-class credits against one reference set."""

    threshold: Threshold
    n: tuple[float, ...]
    p_top: tuple[float, ...]
    k_percent: float

    def pp(self, i: int) -> float:
        expected = expected_topk(self.n[i], self.k_percent)
        return self.p_top[i] / expected if expected > 0 else 0.0


def participation(
    v: CorpusView,
    entities: Sequence[Entity],
    k_percent=1,
    m: CountingMethod | str = CountingMethod.WHOLE,
    workers: int = 1,
) -> Participation:
    t = top_class_threshold(v, k_percent, workers=workers)
    top = top_class(v, t)
    weights = np.zeros((2, len(v.corpus)), dtype=np.int64)
    weights[0, v.rows] = 1
    weights[1, top.rows] = 1
    sums = entity_credit_sums(v.corpus, v.rows, entities, m, weights, workers=workers)
    return Participation(
        t,
        tuple(float(x) for x in sums[0]),
        tuple(float(x) for x in sums[1]),
        float(k_percent),
    )


# --------------------------------------------------------------------------
# Category comparison


@dataclass(frozen=True)
class ComparisonRow:
    category: str
    n_total: int
    n_entity1: float
    n_entity2: float
    p_top_1: float
    p_top_2: float
    pp_1: float
    pp_2: float
    z: float | None
    significant_05: bool
    overlap: int
    cutoff: int
    note: str = ""


@dataclass(frozen=True)
class ComparisonTable:
    entities: tuple[str, str]
    k_percent: float
    counting: CountingMethod
    rows: tuple[ComparisonRow, ...]
    footnotes: tuple[str, ...] = field(default=())


def _compare_view(label, v, pair, k_percent, m, workers) -> ComparisonRow:
    part = participation(v, pair, k_percent, m, workers)
    in1 = v.corpus.countries.any_in(pair[0].codes, v.rows)
    in2 = v.corpus.countries.any_in(pair[1].codes, v.rows)
    overlap = int((in1 & in2).sum())
    z = None
    note = ""
    try:
        res = z_two_proportions(part.p_top[0], part.n[0], part.p_top[1], part.n[1])
        z = res.z
    except DataError as exc:
        note = f"z not computed: {exc}"
    return ComparisonRow(
        category=label,
        n_total=v.n,
        n_entity1=part.n[0],
        n_entity2=part.n[1],
        p_top_1=part.p_top[0],
        p_top_2=part.p_top[1],
        pp_1=part.pp(0),
        pp_2=part.pp(1),
        z=z,
        significant_05=z is not None and abs(z) > 1.96,
        overlap=overlap,
        cutoff=part.threshold.citation_cutoff,
        note=note,
    )


def category_comparison(
    c: Corpus,
    categories: Sequence[str],
    entities: Sequence[Entity],
    k_percent=1,
    m: CountingMethod | str = CountingMethod.WHOLE,
    doctypes=DEFAULT_DOCTYPES,
    workers: int = 1,
) -> ComparisonTable:
    """Compare two entities inside each category, plus an unfiltered world row.

    Each category's top class is computed from that category's own citation
    distribution, so every full category has PP = 1 by construction.
    """
    if len(entities) != 2:
        raise ValueError("category comparison needs exactly two entities")
    m = CountingMethod(m)
    pair = tuple(entities)
    base = c.filter(DoctypeIn(frozenset(doctypes)))
    rows = []
    footnotes = []
    for cat in categories:
        v = base.refine(CategoryIn(frozenset({cat})))
        if v.n == 0:
            raise DataError(f"category {cat} has no records")
        rows.append(_compare_view(cat, v, pair, k_percent, m, workers))
    rows.append(_compare_view("World", base, pair, k_percent, m, workers))
    for r in rows:
        if r.overlap:
            footnotes.append(
                f"{r.category}: {r.overlap} records credited to both entities; z treats samples as independent"
            )
        if r.note:
            footnotes.append(f"{r.category}: {r.note}")
    return ComparisonTable((pair[0].name, pair[1].name), float(k_percent), m, tuple(rows), tuple(footnotes))


# --------------------------------------------------------------------------
# Collaboration classes


@dataclass(frozen=True)
class CollabRow:
    label: str
    blocs: tuple[str, ...]
    n: int
    p_top: int
    expected: float
    pp: float


def collaboration_classes(
    v: CorpusView,
    blocs: Sequence[Entity],
    top: TopClass | None = None,
    k_percent=1,
    workers: int = 1,
) -> list[CollabRow]:
    """PP-top-k% per class of records labelled by which blocs their byline hits.

    Each record falls in exactly one class: the set of blocs intersecting its
    countries, or ``none``.  Rows are ordered by number of blocs, then by the
    order of ``blocs``; empty classes are omitted.
    """
    if len(blocs) > 62:
        raise ValueError("at most 62 blocs")
    seen: dict[str, str] = {}
    for b in blocs:
        for code in b.codes:
            if code in seen:
                raise DataError(f"country {code} is in both {seen[code]} and {b.name}")
            seen[code] = b.name
    if top is None:
        top = top_class(v, top_class_threshold(v, k_percent, workers=workers))
    k_percent = top.threshold.k_percent
    corpus = v.corpus
    bits = np.zeros(len(corpus.countries.vocab), dtype=np.int64)
    for b, bloc in enumerate(blocs):
        for code in bloc.codes:
            j = corpus.countries.index.get(code)
            if j is not None:
                bits[j] |= np.int64(1) << b
    labels = _kernels.chunked("bloc_bits", v.rows, corpus.countries.ptr, corpus.countries.idx, bits, workers=workers)
    in_top = top.contains_rows(v.rows)
    size = np.bincount(labels, minlength=1 << len(blocs)) if len(labels) else np.zeros(1, int)
    tops = np.bincount(labels[in_top], minlength=len(size)) if len(labels) else np.zeros(1, int)
    order = sorted(
        (int(x) for x in np.flatnonzero(size)),
        key=lambda mask: (bin(mask).count("1"), [not (mask >> b) & 1 for b in range(len(blocs))]),
    )
    out = []
    for mask in order:
        names = tuple(b.name for i, b in enumerate(blocs) if (mask >> i) & 1)
        n = int(size[mask])
        p = int(tops[mask])
        expected = expected_topk(n, k_percent)
        out.append(CollabRow("+".join(names) or "none", names, n, p, expected, p / expected))
    return out


# --------------------------------------------------------------------------
# Trends


@dataclass(frozen=True)
class TrendPoint:
    year: int
    entity: str
    n: float
    p_top: float
    pp: float
    cutoff: int


def national_trend(
    corpora: Mapping[int, Corpus],
    entity: Entity,
    k_percent=1,
    m: CountingMethod | str = CountingMethod.WHOLE,
    doctypes=DEFAULT_DOCTYPES,
    workers: int = 1,
) -> list[TrendPoint]:
    """PP-top-k% per publication year, each against that year's own world threshold."""
    out = []
    for year in sorted(corpora):
        c = corpora[year]
        if c is None:
            raise DataError(f"no corpus for year {year}")
        v = c.filter(DoctypeIn(frozenset(doctypes)) & YearIn(frozenset({int(year)})))
        if v.n == 0:
            raise DataError(f"corpus for year {year} has no records of that year")
        part = participation(v, [entity], k_percent, m, workers)
        out.append(
            TrendPoint(int(year), entity.name, part.n[0], part.p_top[0], part.pp(0), part.threshold.citation_cutoff)
        )
    return out
