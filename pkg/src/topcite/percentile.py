"""Exact top-k% thresholds, percentile ranks, and citation-window cutoffs."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import cached_property
from typing import Sequence

import numpy as np

from . import _kernels
from .corpus import (
    DEFAULT_DOCTYPES,
    Corpus,
    CorpusView,
    DataError,
    DoctypeIn,
    EmptySubsetError,
    YearIn,
)

# Above this citation maximum the histogram path would allocate too much;
# fall back to a partition-based selection.
_HISTOGRAM_LIMIT = 1 << 24


def as_fraction(k) -> Fraction:
    """Exact rational for a percentage given as int, str, float or Fraction.

    Floats go through their shortest repr so ``0.1`` means one tenth.
    """
    if isinstance(k, Fraction):
        return k
    if isinstance(k, float):
        return Fraction(repr(k))
    return Fraction(k)


def nominal_rank(n: int, k_percent) -> int:
    """``ceil(n * k / 100)`` in exact arithmetic."""
    k = as_fraction(k_percent)
    return math.ceil(n * k / 100)


def _check_k(k_percent) -> Fraction:
    k = as_fraction(k_percent)
    if not 0 < k < 100:
        raise DataError(f"k must lie in (0, 100), got {k_percent}")
    return k


@dataclass(frozen=True)
class Threshold:
    k_percent: float
    reference_n: int
    nominal_rank: int
    citation_cutoff: int
    actual_size: int

    @property
    def tie_inflation(self) -> int:
        return self.actual_size - self.nominal_rank


def citation_histogram(citations_or_view, workers: int = 1) -> np.ndarray:
    """Counts per citation value (index = citations)."""
    if isinstance(citations_or_view, CorpusView):
        values = citations_or_view.corpus.citations
        rows = citations_or_view.rows
    else:
        values = np.ascontiguousarray(citations_or_view, dtype=np.int64)
        rows = np.arange(len(values), dtype=np.int64)
    if len(rows) == 0:
        return np.zeros(1, dtype=np.int64)
    size = int(values[rows].max()) + 1
    return _kernels.chunked("histogram", rows, values, size, workers=workers)


def _cutoff_from_values(c: np.ndarray, rank: int) -> tuple[int, int]:
    hi = int(c.max())
    if hi < _HISTOGRAM_LIMIT:
        hist = np.bincount(c, minlength=hi + 1)
        return _cutoff_from_histogram(hist, rank)
    cutoff = int(np.partition(c, len(c) - rank)[len(c) - rank])
    return cutoff, int((c >= cutoff).sum())


def _cutoff_from_histogram(hist: np.ndarray, rank: int) -> tuple[int, int]:
    desc = np.cumsum(hist[::-1])
    pos = int(np.searchsorted(desc, rank))
    return len(hist) - 1 - pos, int(desc[pos])


def top_class_threshold(v: CorpusView, k_percent=1, workers: int = 1) -> Threshold:
    """Citation cutoff of the top-k% class of ``v``.

    The cutoff is the citation count of the record at descending rank
    ``ceil(n*k/100)``; every record at or above it is in the class, so ties
    can make ``actual_size`` exceed ``nominal_rank``.
    """
    _check_k(k_percent)
    if v.n == 0:
        raise EmptySubsetError("empty subset: no threshold")
    rank = nominal_rank(v.n, k_percent)
    c = v.corpus.citations
    if int(c[v.rows].max()) < _HISTOGRAM_LIMIT:
        cutoff, actual = _cutoff_from_histogram(citation_histogram(v, workers), rank)
    else:
        cutoff, actual = _cutoff_from_values(c[v.rows], rank)
    return Threshold(float(k_percent), v.n, rank, cutoff, actual)


@dataclass(frozen=True, eq=False)
class TopClass:
    """Members of a top-k% class: a boolean mask aligned with ``view.rows``."""

    view: CorpusView
    threshold: Threshold
    mask: np.ndarray

    @cached_property
    def rows(self) -> np.ndarray:
        return self.view.rows[self.mask]

    @cached_property
    def ids(self) -> frozenset[str]:
        return frozenset(str(x) for x in self.view.corpus.ids[self.rows])

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, record_id: str) -> bool:
        return record_id in self.ids

    def contains_rows(self, rows: np.ndarray) -> np.ndarray:
        member = np.zeros(len(self.view.corpus), dtype=bool)
        member[self.rows] = True
        return member[rows]


def top_class(v: CorpusView, t: Threshold) -> TopClass:
    return TopClass(v, t, v.citations >= t.citation_cutoff)


def top_by_score(scores: np.ndarray, k_percent) -> tuple[int, float, np.ndarray]:
    """Top-k% selection over arbitrary real scores, ties at the cutoff included.

    Returns ``(nominal_rank, cutoff, mask)``.
    """
    _check_k(k_percent)
    scores = np.asarray(scores, dtype=float)
    if len(scores) == 0:
        raise EmptySubsetError("empty subset: no threshold")
    rank = nominal_rank(len(scores), k_percent)
    cutoff = float(np.partition(scores, len(scores) - rank)[len(scores) - rank])
    return rank, cutoff, scores >= cutoff


# --------------------------------------------------------------------------
# Percentile ranks


class PercentileScheme(str, Enum):
    """Tie rules for mapping citation counts to percentile ranks.

    STRICT_BELOW: ``100 * below / n`` in [0, 100); ties share the group minimum.
    MID_FRACTION: ``100 * (below + ties/2) / n`` in (0, 100); mid-rank of the tie group.
    FRACTIONAL_TIES: tie group shares the mean of its positional percentiles
    ``100 * (j + 1) / (n + 1)``, i.e. ``100 * (below + (ties + 1)/2) / (n + 1)``.
    """

    STRICT_BELOW = "strict-below"
    MID_FRACTION = "mid"
    FRACTIONAL_TIES = "fractional-ties"


@dataclass(frozen=True, eq=False)
class RankAssignment:
    """Percentile ranks of ``rows`` against reference sets of size ``sizes``.

    ``below`` and ``ties`` are the exact per-record counts the ranks derive
    from, so floored rank classes are computed in integer arithmetic.
    """

    scheme: PercentileScheme
    corpus: Corpus
    rows: np.ndarray
    below: np.ndarray
    ties: np.ndarray
    sizes: np.ndarray

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def ids(self) -> np.ndarray:
        return self.corpus.ids[self.rows]

    @cached_property
    def values(self) -> np.ndarray:
        b = self.below.astype(float)
        t = self.ties.astype(float)
        n = self.sizes.astype(float)
        if self.scheme is PercentileScheme.STRICT_BELOW:
            return 100.0 * b / n
        if self.scheme is PercentileScheme.MID_FRACTION:
            return 100.0 * (b + t / 2.0) / n
        return 100.0 * (b + (t + 1.0) / 2.0) / (n + 1.0)

    def classes(self, n_classes: int = 100) -> np.ndarray:
        """Exact ``floor(rank * C / 100)`` per record as int64."""
        b, t, n = self.below, self.ties, self.sizes
        c = np.int64(n_classes)
        if self.scheme is PercentileScheme.STRICT_BELOW:
            return (c * b) // n
        if self.scheme is PercentileScheme.MID_FRACTION:
            return (c * (2 * b + t)) // (2 * n)
        return (c * (2 * b + t + 1)) // (2 * (n + 1))

    def as_dict(self) -> dict[str, float]:
        return {str(i): float(r) for i, r in zip(self.ids, self.values)}

    def restrict(self, subset: CorpusView | np.ndarray) -> "RankAssignment":
        """Ranks of a subset, still relative to the original reference sets."""
        rows = subset.rows if isinstance(subset, CorpusView) else np.asarray(subset, np.int64)
        if len(rows) == 0:
            pos = np.zeros(0, dtype=np.int64)
        else:
            if len(self.rows) == 0:
                raise DataError("subset is not contained in the ranked reference set")
            pos = np.minimum(np.searchsorted(self.rows, rows), len(self.rows) - 1)
            if not np.array_equal(self.rows[pos], rows):
                raise DataError("subset is not contained in the ranked reference set")
        return RankAssignment(
            self.scheme, self.corpus, rows, self.below[pos], self.ties[pos], self.sizes[pos]
        )


def _counts_below(citations: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    hi = int(citations.max())
    if hi < _HISTOGRAM_LIMIT:
        hist = np.bincount(citations, minlength=hi + 1)
        below = np.cumsum(hist) - hist
        return below[citations], hist[citations]
    values, inverse, counts = np.unique(citations, return_inverse=True, return_counts=True)
    below = np.cumsum(counts) - counts
    return below[inverse], counts[inverse]


def percentile_ranks(
    v: CorpusView, scheme: PercentileScheme | str = PercentileScheme.STRICT_BELOW
) -> RankAssignment:
    scheme = PercentileScheme(scheme)
    if v.n == 0:
        raise EmptySubsetError("empty subset: no percentile ranks")
    below, ties = _counts_below(v.citations)
    sizes = np.full(v.n, v.n, dtype=np.int64)
    return RankAssignment(scheme, v.corpus, v.rows, below.astype(np.int64), ties.astype(np.int64), sizes)


def grouped_percentile_ranks(
    v: CorpusView, labels: Sequence, scheme: PercentileScheme | str = PercentileScheme.STRICT_BELOW
) -> RankAssignment:
    """Ranks computed separately within each label group of ``v``.

    ``labels`` is aligned with ``v.rows``.
    """
    scheme = PercentileScheme(scheme)
    if v.n == 0:
        raise EmptySubsetError("empty subset: no percentile ranks")
    labels = np.asarray(labels)
    _, group = np.unique(labels, return_inverse=True)
    group = group.ravel()
    c = v.citations
    below = np.empty(v.n, dtype=np.int64)
    ties = np.empty(v.n, dtype=np.int64)
    sizes = np.empty(v.n, dtype=np.int64)
    for g in range(int(group.max()) + 1):
        sel = np.flatnonzero(group == g)
        b, t = _counts_below(c[sel])
        below[sel] = b
        ties[sel] = t
        sizes[sel] = len(sel)
    return RankAssignment(scheme, v.corpus, v.rows, below, ties, sizes)


# --------------------------------------------------------------------------
# Citation windows


@dataclass(frozen=True)
class WindowThreshold:
    year: int
    window_length: int
    citation_cutoff: int
    threshold: Threshold


def window_thresholds(
    c: Corpus,
    years: Sequence[int],
    k_percent=1,
    doctypes=DEFAULT_DOCTYPES,
    retrieval_year: int | None = None,
    workers: int = 1,
) -> list[WindowThreshold]:
    """Top-k% cutoff per publication year with its citation window in whole years."""
    if retrieval_year is None:
        if c.retrieval_date is None:
            raise DataError("corpus has no retrieval date; pass retrieval_year")
        retrieval_year = c.retrieval_date.year
    base = c.filter(DoctypeIn(frozenset(doctypes)))
    out = []
    for y in years:
        view = base.refine(YearIn(frozenset({int(y)})))
        if view.n == 0:
            raise DataError(f"no records for year {y}")
        t = top_class_threshold(view, k_percent, workers=workers)
        out.append(WindowThreshold(int(y), retrieval_year - int(y), t.citation_cutoff, t))
    return out


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Product-moment correlation of two equal-length samples."""
    if len(xs) != len(ys):
        raise ValueError("inputs differ in length")
    if len(xs) < 3:
        raise ValueError("need at least three pairs")
    n = len(xs)
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
