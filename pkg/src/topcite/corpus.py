"""Publication records, corpus loading, and filtered views.

A :class:`Corpus` is stored column-wise: one numpy array per scalar field and
a CSR-style :class:`CodeLists` for the multi-valued country and category
bylines.  :class:`PublicationRecord` objects are materialised on demand.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from . import _kernels

FIELDS = ("id", "year", "doctype", "citations", "countries", "categories")
LIST_SEP = "|"


class DataError(ValueError):
    """Bad input data or an impossible computation on valid input."""


class LoadError(DataError):
    def __init__(self, message: str, row: int | None = None, field: str | None = None):
        self.row = row
        self.field = field
        where = f"row {row}: " if row is not None else ""
        super().__init__(where + message)


class EmptySubsetError(DataError):
    def __init__(self, message: str = "empty subset"):
        super().__init__(message)


class DocType(str, Enum):
    ARTICLE = "Article"
    REVIEW = "Review"
    LETTER = "Letter"
    OTHER = "Other"

    @classmethod
    def parse(cls, text: str) -> "DocType":
        key = text.strip().lower()
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown doctype {text!r}")


_DOCTYPE_CODES = {d: i for i, d in enumerate(DocType)}
_DOCTYPE_LIST = list(DocType)

DEFAULT_DOCTYPES = frozenset({DocType.ARTICLE, DocType.REVIEW, DocType.LETTER})


def _dedupe(items: Iterable[str]) -> tuple[str, ...]:
    return tuple(dict.fromkeys(s for s in items))


@dataclass(frozen=True)
class PublicationRecord:
    id: str
    year: int
    doctype: DocType
    citations: int
    countries: tuple[str, ...] = ()
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.citations < 0:
            raise ValueError(f"record {self.id}: negative citations")
        if len(set(self.countries)) != len(self.countries):
            raise ValueError(f"record {self.id}: duplicate country codes")
        if len(set(self.categories)) != len(self.categories):
            raise ValueError(f"record {self.id}: duplicate category codes")


@dataclass(frozen=True, eq=False)
class CodeLists:
    """Per-record lists of opaque codes in CSR layout."""

    vocab: tuple[str, ...]
    ptr: np.ndarray
    idx: np.ndarray

    @classmethod
    def from_lists(cls, lists: Sequence[Sequence[str]]) -> "CodeLists":
        lookup: dict[str, int] = {}
        flat: list[int] = []
        lens = np.empty(len(lists), dtype=np.int64)
        for i, codes in enumerate(lists):
            lens[i] = len(codes)
            for c in codes:
                j = lookup.get(c)
                if j is None:
                    j = lookup[c] = len(lookup)
                flat.append(j)
        return cls.from_arrays(tuple(lookup), lens, np.asarray(flat, dtype=np.int64))

    @classmethod
    def from_arrays(cls, vocab, lengths, idx) -> "CodeLists":
        ptr = np.zeros(len(lengths) + 1, dtype=np.int64)
        np.cumsum(lengths, out=ptr[1:])
        idx = np.ascontiguousarray(idx, dtype=np.int64)
        ptr.setflags(write=False)
        idx.setflags(write=False)
        return cls(tuple(vocab), ptr, idx)

    def __len__(self) -> int:
        return len(self.ptr) - 1

    def row(self, i: int) -> tuple[str, ...]:
        return tuple(self.vocab[j] for j in self.idx[self.ptr[i] : self.ptr[i + 1]])

    @cached_property
    def lengths(self) -> np.ndarray:
        return np.diff(self.ptr)

    @cached_property
    def max_length(self) -> int:
        return int(self.lengths.max()) if len(self) else 0

    @cached_property
    def index(self) -> dict[str, int]:
        return {c: i for i, c in enumerate(self.vocab)}

    def entries(self, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """For the lists of ``rows``: owner position, code index, list length."""
        owner, pos, lens = _kernels.row_entries(self.ptr, np.asarray(rows, dtype=np.int64))
        return owner, self.idx[pos], lens

    def member_vector(self, codes: Iterable[str]) -> np.ndarray:
        """uint8 indicator over the vocabulary; unknown codes are ignored."""
        vec = np.zeros(len(self.vocab), dtype=np.uint8)
        for c in codes:
            j = self.index.get(c)
            if j is not None:
                vec[j] = 1
        return vec

    def any_in(self, codes: Iterable[str], rows: np.ndarray | None = None) -> np.ndarray:
        if rows is None:
            rows = np.arange(len(self), dtype=np.int64)
        member = self.member_vector(codes)
        if not member.any():
            return np.zeros(len(rows), dtype=bool)
        return np.asarray(_kernels.chunked("row_any", rows, self.ptr, self.idx, member))


@dataclass(frozen=True, eq=False)
class Corpus:
    """Immutable, column-oriented collection of publication records."""

    ids: np.ndarray
    years: np.ndarray
    doctypes: np.ndarray
    citations: np.ndarray
    countries: CodeLists
    categories: CodeLists
    retrieval_date: dt.date | None = None
    label: str = ""

    def __post_init__(self):
        n = len(self.ids)
        for name in ("years", "doctypes", "citations"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"column {name} has wrong length")
        if len(self.countries) != n or len(self.categories) != n:
            raise ValueError("byline columns have wrong length")
        for arr in (self.ids, self.years, self.doctypes, self.citations):
            arr.setflags(write=False)

    @classmethod
    def from_records(
        cls,
        records: Iterable[PublicationRecord],
        retrieval_date: dt.date | None = None,
        label: str = "",
    ) -> "Corpus":
        builder = _Builder()
        for rec in records:
            builder.add(rec.id, rec.year, rec.doctype, rec.citations, rec.countries, rec.categories)
        return builder.build(retrieval_date, label)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n(self) -> int:
        return len(self.ids)

    def record(self, i: int) -> PublicationRecord:
        return PublicationRecord(
            id=str(self.ids[i]),
            year=int(self.years[i]),
            doctype=_DOCTYPE_LIST[self.doctypes[i]],
            citations=int(self.citations[i]),
            countries=self.countries.row(i),
            categories=self.categories.row(i),
        )

    def __iter__(self) -> Iterator[PublicationRecord]:
        for i in range(len(self)):
            yield self.record(i)

    @cached_property
    def all_rows(self) -> np.ndarray:
        rows = np.arange(len(self), dtype=np.int64)
        rows.setflags(write=False)
        return rows

    @cached_property
    def row_of_id(self) -> dict[str, int]:
        return {str(x): i for i, x in enumerate(self.ids)}

    def filter(self, f: "SubsetFilter | None" = None) -> "CorpusView":
        f = f if f is not None else ALL
        mask = f.mask(self)
        return CorpusView(self, f, np.flatnonzero(mask).astype(np.int64))

    def view(self) -> "CorpusView":
        return CorpusView(self, ALL, self.all_rows)

    def default_view(self, doctypes: Iterable[DocType] | None = None) -> "CorpusView":
        """View restricted to the analysis doctypes (Article, Review, Letter)."""
        return self.filter(DoctypeIn(frozenset(doctypes or DEFAULT_DOCTYPES)))


class _Builder:
    def __init__(self):
        self.ids: list[str] = []
        self.years: list[int] = []
        self.doctypes: list[int] = []
        self.citations: list[int] = []
        self.countries: list[tuple[str, ...]] = []
        self.categories: list[tuple[str, ...]] = []
        self.seen: set[str] = set()

    def add(self, rid, year, doctype, citations, countries, categories, row=None):
        if rid in self.seen:
            raise LoadError(f"duplicate id: {rid}", row, "id")
        if citations < 0:
            raise LoadError("negative citations", row, "citations")
        self.seen.add(rid)
        self.ids.append(rid)
        self.years.append(year)
        self.doctypes.append(_DOCTYPE_CODES[doctype])
        self.citations.append(citations)
        self.countries.append(_dedupe(countries))
        self.categories.append(_dedupe(categories))

    def build(self, retrieval_date, label) -> Corpus:
        ids = np.empty(len(self.ids), dtype=object)
        ids[:] = self.ids
        return Corpus(
            ids=ids,
            years=np.asarray(self.years, dtype=np.int64),
            doctypes=np.asarray(self.doctypes, dtype=np.int8),
            citations=np.asarray(self.citations, dtype=np.int64),
            countries=CodeLists.from_lists(self.countries),
            categories=CodeLists.from_lists(self.categories),
            retrieval_date=retrieval_date,
            label=label,
        )


# --------------------------------------------------------------------------
# Filters


class SubsetFilter:
    """Pure predicate over records; combine with ``&``, ``|`` and ``~``."""

    def mask(self, corpus: Corpus) -> np.ndarray:
        raise NotImplementedError

    def matches(self, record: PublicationRecord) -> bool:
        raise NotImplementedError

    def __and__(self, other: "SubsetFilter") -> "SubsetFilter":
        return And((self, other))

    def __or__(self, other: "SubsetFilter") -> "SubsetFilter":
        return Or((self, other))

    def __invert__(self) -> "SubsetFilter":
        return Not(self)


@dataclass(frozen=True)
class Everything(SubsetFilter):
    def mask(self, corpus):
        return np.ones(len(corpus), dtype=bool)

    def matches(self, record):
        return True

    def __str__(self):
        return "all"


ALL = Everything()


@dataclass(frozen=True)
class YearIn(SubsetFilter):
    years: frozenset[int]

    def mask(self, corpus):
        return np.isin(corpus.years, np.fromiter(self.years, dtype=np.int64))

    def matches(self, record):
        return record.year in self.years

    def __str__(self):
        return "year in {" + ",".join(map(str, sorted(self.years))) + "}"


@dataclass(frozen=True)
class DoctypeIn(SubsetFilter):
    doctypes: frozenset[DocType]

    def mask(self, corpus):
        codes = [_DOCTYPE_CODES[d] for d in self.doctypes]
        return np.isin(corpus.doctypes, np.asarray(codes, dtype=np.int8))

    def matches(self, record):
        return record.doctype in self.doctypes

    def __str__(self):
        return "doctype in {" + ",".join(sorted(d.value for d in self.doctypes)) + "}"


@dataclass(frozen=True)
class CountryIn(SubsetFilter):
    codes: frozenset[str]

    def mask(self, corpus):
        return corpus.countries.any_in(self.codes)

    def matches(self, record):
        return not self.codes.isdisjoint(record.countries)

    def __str__(self):
        return "country in {" + ",".join(sorted(self.codes)) + "}"


@dataclass(frozen=True)
class CategoryIn(SubsetFilter):
    codes: frozenset[str]

    def mask(self, corpus):
        return corpus.categories.any_in(self.codes)

    def matches(self, record):
        return not self.codes.isdisjoint(record.categories)

    def __str__(self):
        return "category in {" + ",".join(sorted(self.codes)) + "}"


@dataclass(frozen=True)
class And(SubsetFilter):
    parts: tuple[SubsetFilter, ...]

    def mask(self, corpus):
        out = np.ones(len(corpus), dtype=bool)
        for p in self.parts:
            out &= p.mask(corpus)
        return out

    def matches(self, record):
        return all(p.matches(record) for p in self.parts)

    def __str__(self):
        return "(" + " AND ".join(map(str, self.parts)) + ")"


@dataclass(frozen=True)
class Or(SubsetFilter):
    parts: tuple[SubsetFilter, ...]

    def mask(self, corpus):
        out = np.zeros(len(corpus), dtype=bool)
        for p in self.parts:
            out |= p.mask(corpus)
        return out

    def matches(self, record):
        return any(p.matches(record) for p in self.parts)

    def __str__(self):
        return "(" + " OR ".join(map(str, self.parts)) + ")"


@dataclass(frozen=True)
class Not(SubsetFilter):
    part: SubsetFilter

    def mask(self, corpus):
        return ~self.part.mask(corpus)

    def matches(self, record):
        return not self.part.matches(record)

    def __str__(self):
        return f"NOT {self.part}"


def years(*ys: int) -> YearIn:
    return YearIn(frozenset(int(y) for y in ys))


def doctypes(*ds: DocType | str) -> DoctypeIn:
    return DoctypeIn(frozenset(d if isinstance(d, DocType) else DocType.parse(d) for d in ds))


def countries(*codes: str) -> CountryIn:
    return CountryIn(frozenset(codes))


def categories(*codes: str) -> CategoryIn:
    return CategoryIn(frozenset(codes))


@dataclass(frozen=True, eq=False)
class CorpusView:
    """A corpus restricted to the records a filter accepts (sorted row indices)."""

    corpus: Corpus
    filter: SubsetFilter
    rows: np.ndarray

    def __post_init__(self):
        self.rows.setflags(write=False)

    @property
    def n(self) -> int:
        return len(self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def citations(self) -> np.ndarray:
        return self.corpus.citations[self.rows]

    @property
    def ids(self) -> np.ndarray:
        return self.corpus.ids[self.rows]

    def records(self) -> Iterator[PublicationRecord]:
        for i in self.rows:
            yield self.corpus.record(int(i))

    def refine(self, f: SubsetFilter) -> "CorpusView":
        """Narrow this view by a further filter."""
        keep = f.mask(self.corpus)[self.rows]
        return CorpusView(self.corpus, And((self.filter, f)), self.rows[keep])

    def contains_rows(self, rows: np.ndarray) -> np.ndarray:
        """Boolean mask: which of ``rows`` belong to this view."""
        pos = np.searchsorted(self.rows, rows)
        pos = np.minimum(pos, max(len(self.rows) - 1, 0))
        if len(self.rows) == 0:
            return np.zeros(len(rows), dtype=bool)
        return self.rows[pos] == rows


def filter_corpus(c: Corpus, f: SubsetFilter | None = None) -> CorpusView:
    return c.filter(f)


# --------------------------------------------------------------------------
# Reporting


@dataclass(frozen=True)
class ValidationReport:
    n: int
    empty_countries: int
    empty_categories: int
    other_doctype: int
    notes: tuple[str, ...] = ()


def validate_corpus(c: Corpus) -> ValidationReport:
    empty_countries = int((c.countries.lengths == 0).sum())
    empty_categories = int((c.categories.lengths == 0).sum())
    other = int((c.doctypes == _DOCTYPE_CODES[DocType.OTHER]).sum())
    notes = []
    if empty_countries:
        notes.append(
            f"{empty_countries} records have no country; they count in world totals only"
        )
    if empty_categories:
        notes.append(
            f"{empty_categories} records have no category; they are left out of per-category analyses"
        )
    if other:
        notes.append(f"{other} records have doctype Other; default analyses exclude them")
    return ValidationReport(len(c), empty_countries, empty_categories, other, tuple(notes))


@dataclass(frozen=True)
class SummaryStats:
    n: int
    min: int
    max: int
    median: float
    mean: float
    histogram: tuple[tuple[int, int], ...]


def corpus_stats(v: CorpusView) -> SummaryStats:
    if v.n == 0:
        raise EmptySubsetError()
    c = v.citations
    values, counts = np.unique(c, return_counts=True)
    return SummaryStats(
        n=v.n,
        min=int(c.min()),
        max=int(c.max()),
        median=float(np.median(c)),
        mean=float(c.sum() / v.n),
        histogram=tuple((int(a), int(b)) for a, b in zip(values, counts)),
    )


# --------------------------------------------------------------------------
# File IO

_FORMATS = {
    "delimited": "delimited",
    "csv": "delimited",
    "tsv": "delimited",
    "record-per-line": "jsonl",
    "jsonl": "jsonl",
    "ndjson": "jsonl",
}


def _resolve_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "jsonl" if path.suffix.lower() in (".jsonl", ".ndjson") else "delimited"
    try:
        return _FORMATS[fmt]
    except KeyError:
        raise ValueError(f"unknown corpus format {fmt!r}") from None


def _split_list(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [str(v).strip() for v in value if str(v).strip()]
    return [s.strip() for s in str(value).split(LIST_SEP) if s.strip()]


def _parse_meta(items: Mapping[str, str]) -> tuple[dt.date | None, str]:
    date = items.get("retrieval_date")
    return (dt.date.fromisoformat(date) if date else None), items.get("label", "")


def _add_row(builder: _Builder, raw: Mapping, row: int) -> None:
    for name in ("id", "year", "doctype", "citations"):
        value = raw.get(name)
        if value is None or (isinstance(value, str) and not value.strip()):
            raise LoadError(f"missing field: {name}", row, name)
    for name in ("countries", "categories"):
        if name not in raw:
            raise LoadError(f"missing field: {name}", row, name)
    try:
        year = int(str(raw["year"]).strip())
    except ValueError:
        raise LoadError(f"non-integer year: {raw['year']!r}", row, "year") from None
    cites = raw["citations"]
    if isinstance(cites, bool) or (isinstance(cites, float) and not cites.is_integer()):
        raise LoadError(f"non-integer citations: {cites!r}", row, "citations")
    try:
        citations = int(str(cites).strip()) if not isinstance(cites, (int, float)) else int(cites)
    except ValueError:
        raise LoadError(f"non-integer citations: {cites!r}", row, "citations") from None
    try:
        doctype = DocType.parse(str(raw["doctype"]))
    except ValueError as exc:
        raise LoadError(str(exc), row, "doctype") from None
    builder.add(
        str(raw["id"]).strip(),
        year,
        doctype,
        citations,
        _split_list(raw["countries"]),
        _split_list(raw["categories"]),
        row=row,
    )


def load_corpus(
    path: str | Path,
    format: str | None = None,
    retrieval_date: dt.date | None = None,
    label: str | None = None,
) -> Corpus:
    """Read a delimited or record-per-line corpus file.

    Delimited files need a header row with the columns in ``FIELDS``; list
    columns are ``|``-separated.  Optional leading ``# key=value`` lines carry
    ``retrieval_date`` and ``label``.  Record-per-line files hold one JSON
    object per line; an optional first line ``{"_meta": {...}}`` does the same.
    Explicit ``retrieval_date``/``label`` arguments override file metadata.
    """
    path = Path(path)
    fmt = _resolve_format(path, format)
    builder = _Builder()
    meta: dict[str, str] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        if fmt == "delimited":
            lines = iter(fh)
            header = None
            for line in lines:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    meta[key.strip()] = value.strip()
                    continue
                header = line
                break
            if header is None:
                raise LoadError("empty file")
            delim = "\t" if path.suffix.lower() == ".tsv" or "\t" in header else ","
            reader = csv.DictReader(_chain(header, lines), delimiter=delim)
            for row, raw in enumerate(reader, start=1):
                _add_row(builder, raw, row)
        else:
            row = 0
            for line in fh:
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise LoadError(f"invalid JSON: {exc.msg}", row + 1) from None
                if row == 0 and "_meta" in obj:
                    meta.update({k: str(v) for k, v in obj["_meta"].items()})
                    continue
                row += 1
                _add_row(builder, obj, row)
    file_date, file_label = _parse_meta(meta)
    return builder.build(
        retrieval_date if retrieval_date is not None else file_date,
        label if label is not None else (file_label or path.name),
    )


def _chain(first, rest):
    yield first
    yield from rest


def write_corpus(c: Corpus, path: str | Path, format: str | None = None) -> None:
    """Serialise ``c`` in a form :func:`load_corpus` reads back identically."""
    path = Path(path)
    fmt = _resolve_format(path, format)
    meta = {}
    if c.retrieval_date is not None:
        meta["retrieval_date"] = c.retrieval_date.isoformat()
    if c.label:
        meta["label"] = " ".join(c.label.splitlines())
    with path.open("w", newline="", encoding="utf-8") as fh:
        if fmt == "delimited":
            for k, v in meta.items():
                fh.write(f"# {k}={v}\n")
            delim = "\t" if path.suffix.lower() == ".tsv" else ","
            writer = csv.writer(fh, delimiter=delim, lineterminator="\n")
            writer.writerow(FIELDS)
            for rec in c:
                writer.writerow(
                    [
                        rec.id,
                        rec.year,
                        rec.doctype.value,
                        rec.citations,
                        LIST_SEP.join(rec.countries),
                        LIST_SEP.join(rec.categories),
                    ]
                )
        else:
            if meta:
                fh.write(json.dumps({"_meta": meta}) + "\n")
            for rec in c:
                obj = {
                    "id": rec.id,
                    "year": rec.year,
                    "doctype": rec.doctype.value,
                    "citations": rec.citations,
                    "countries": list(rec.countries),
                    "categories": list(rec.categories),
                }
                fh.write(json.dumps(obj) + "\n")


# --------------------------------------------------------------------------
# Entities and bloc mappings


@dataclass(frozen=True)
class Entity:
    """A named set of country codes credited together (a country or a bloc)."""

    name: str
    codes: frozenset[str] = field(default_factory=frozenset)

    @classmethod
    def country(cls, code: str) -> "Entity":
        return cls(code, frozenset({code}))


def load_bloc_mapping(path: str | Path) -> dict[str, frozenset[str]]:
    """Read ``country_code,bloc_code`` rows into ``{bloc: countries}``.

    A country may belong to several blocs (e.g. EU27 and EUUK).
    """
    blocs: dict[str, set[str]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].startswith("#"):
                continue
            if len(row) < 2:
                raise LoadError("bloc mapping needs two columns", i)
            code, bloc = row[0].strip(), row[1].strip()
            if i == 1 and code == "country_code" and bloc == "bloc_code":
                continue
            blocs.setdefault(bloc, set()).add(code)
    return {b: frozenset(cs) for b, cs in blocs.items()}


def resolve_entities(
    tokens: Iterable[str], blocs: Mapping[str, frozenset[str]] | None = None
) -> list[Entity]:
    """Bloc codes expand to their member countries; anything else is a country."""
    blocs = blocs or {}
    out = []
    for tok in tokens:
        tok = tok.strip()
        if not tok:
            continue
        out.append(Entity(tok, blocs[tok]) if tok in blocs else Entity.country(tok))
    return out
