"""Seeded synthetic corpora with skewed, field-dependent citation counts.

Citations are ``floor(exp(mu + shift + sigma * Z))`` per record, optionally
zero-inflated.  ``shift`` is the mean quality shift of the configured
countries on the byline plus ``collab_boost`` per co-authoring partner.
Each field block draws from its own generator seeded by ``(seed, block)``,
so output does not depend on how blocks are scheduled.
"""

from __future__ import annotations

import configparser
import csv
import datetime as dt
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import (
    CodeLists,
    Corpus,
    DataError,
    DocType,
    Entity,
    LIST_SEP,
    LoadError,
    _DOCTYPE_CODES,
)
from .indicators import (
    CountingMethod,
    entity_size,
    esi_refined_ranks,
    raw_pp_topk,
    refined_pp_topk,
    refined_top_rows,
)
from .percentile import PercentileScheme, grouped_percentile_ranks, top_class_threshold

_SEED_MASK = (1 << 64) - 1


@dataclass(frozen=True)
class FieldProfile:
    category: str
    n_records: int
    mu: float
    sigma: float
    zero_prob: float = 0.0

    def __post_init__(self):
        if self.n_records < 1:
            raise DataError(f"field {self.category}: n_records must be >= 1")
        if not self.sigma > 0:
            raise DataError(f"field {self.category}: sigma must be > 0")
        if not 0 <= self.zero_prob < 1:
            raise DataError(f"field {self.category}: zero_prob must lie in [0, 1)")


@dataclass(frozen=True)
class CountryMix:
    shares: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    quality_shift: Mapping[str, float] = field(default_factory=dict)
    collab_prob: float = 0.0
    collab_boost: float = 0.0
    tri_prob: float = 0.0
    rest_code: str = "ROW"

    def __post_init__(self):
        for name in ("collab_prob", "tri_prob"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise DataError(f"{name} must lie in [0, 1]")
        if self.collab_prob + self.tri_prob > 1:
            raise DataError("collab_prob + tri_prob must not exceed 1")
        for country, per_field in self.shares.items():
            for f, s in per_field.items():
                if not 0 <= s <= 1:
                    raise DataError(f"share of {country} in {f} outside [0, 1]")

    @property
    def countries(self) -> tuple[str, ...]:
        return tuple(sorted(self.shares))

    def field_shares(self, category: str) -> np.ndarray:
        return np.array([self.shares[c].get(category, 0.0) for c in self.countries], dtype=float)


@dataclass(frozen=True)
class SynthSpec:
    fields: tuple[FieldProfile, ...]
    mix: CountryMix = field(default_factory=CountryMix)
    years: tuple[int, ...] = (2019,)
    seed: int = 0
    retrieval_date: dt.date | None = None
    label: str = "synthetic"

    def __post_init__(self):
        if not self.fields:
            raise DataError("spec needs at least one field")
        cats = [f.category for f in self.fields]
        if len(set(cats)) != len(cats):
            raise DataError("field categories must be distinct")
        if not self.years:
            raise DataError("spec needs at least one publication year")
        for f in self.fields:
            total = float(self.mix.field_shares(f.category).sum())
            if total > 1 + 1e-12:
                raise DataError(f"country shares in field {f.category} sum to {total:.6f} > 1")

    @property
    def n_records(self) -> int:
        return sum(f.n_records for f in self.fields)


def _generate_block(spec: SynthSpec, b: int, prof: FieldProfile):
    mix = spec.mix
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed & _SEED_MASK, b]))
    n = prof.n_records
    n_c = len(mix.countries)
    cum = np.cumsum(mix.field_shares(prof.category))
    u_primary = rng.random(n)
    u_collab = rng.random(n)
    partner_keys = rng.random((n, max(n_c, 1)))
    normals = rng.standard_normal(n)
    u_zero = rng.random(n)
    year_pick = rng.integers(0, len(spec.years), size=n)

    primary = np.searchsorted(cum, u_primary, side="right") if n_c else np.zeros(n, np.int64)
    configured = primary < n_c
    n_extra = np.where(u_collab < mix.tri_prob, 2, np.where(u_collab < mix.tri_prob + mix.collab_prob, 1, 0))
    n_extra = np.where(configured, np.minimum(n_extra, max(n_c - 1, 0)), 0)

    shifts = np.array([mix.quality_shift.get(c, 0.0) for c in mix.countries] + [0.0])
    if n_c:
        keys = partner_keys.copy()
        keys[np.flatnonzero(configured), primary[configured]] = 2.0
        order = np.argsort(keys, axis=1, kind="stable")
        partners = order[:, :2] if n_c >= 2 else np.zeros((n, 2), np.int64)
    else:
        partners = np.zeros((n, 2), np.int64)

    members = np.stack([primary, partners[:, 0], partners[:, 1]], axis=1)
    present = np.stack([np.ones(n, bool), n_extra >= 1, n_extra >= 2], axis=1)
    member_shift = np.where(present, shifts[members], 0.0).sum(axis=1) / present.sum(axis=1)
    shift = np.where(configured, member_shift, 0.0) + mix.collab_boost * n_extra

    cites = np.floor(np.exp(prof.mu + shift + prof.sigma * normals)).astype(np.int64)
    cites[u_zero < prof.zero_prob] = 0

    rest = n_c  # vocabulary index of rest_code
    has_rest_code = bool(mix.rest_code)
    lengths = np.where(configured, 1 + n_extra, 1 if has_rest_code else 0).astype(np.int64)
    flat = np.where(configured[:, None], members, rest)[present & (configured | has_rest_code)[:, None]]
    years = np.asarray(spec.years, dtype=np.int64)[year_pick]
    return cites, years, lengths, flat


def generate(spec: SynthSpec) -> Corpus:
    """Build the corpus described by ``spec``; identical specs give identical corpora."""
    cites, years, lengths, flats, cat_idx, ids = [], [], [], [], [], []
    for b, prof in enumerate(spec.fields):
        c, y, ln, fl = _generate_block(spec, b, prof)
        cites.append(c)
        years.append(y)
        lengths.append(ln)
        flats.append(fl)
        cat_idx.append(np.full(prof.n_records, b, dtype=np.int64))
        width = len(str(prof.n_records - 1))
        ids.extend(f"{prof.category}-{j:0{width}d}" for j in range(prof.n_records))
    n = spec.n_records
    id_arr = np.empty(n, dtype=object)
    id_arr[:] = ids
    vocab = spec.mix.countries + ((spec.mix.rest_code,) if spec.mix.rest_code else ())
    return Corpus(
        ids=id_arr,
        years=np.concatenate(years),
        doctypes=np.full(n, _DOCTYPE_CODES[DocType.ARTICLE], dtype=np.int8),
        citations=np.concatenate(cites),
        countries=CodeLists.from_arrays(vocab, np.concatenate(lengths), np.concatenate(flats)),
        categories=CodeLists.from_arrays(
            tuple(f.category for f in spec.fields),
            np.ones(n, dtype=np.int64),
            np.concatenate(cat_idx),
        ),
        retrieval_date=spec.retrieval_date,
        label=spec.label,
    )


# --------------------------------------------------------------------------
# Config files


def _parse_shares(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        if not part.strip():
            continue
        key, _, value = part.partition(":")
        out[key.strip()] = float(value)
    return out


def load_spec(path: str | Path, seed: int | None = None) -> SynthSpec:
    """Read a spec from an INI-style key-value file.

    ``[synth]`` holds seed, years, retrieval_date, label, collab_prob,
    tri_prob, collab_boost and rest_code; each ``[field:CODE]`` section holds
    n_records, mu, sigma and optional zero_prob; each ``[country:CODE]``
    section holds ``shares = FIELD:share, ...`` and optional quality_shift.
    """
    cp = configparser.ConfigParser()
    with Path(path).open(encoding="utf-8") as fh:
        cp.read_file(fh)
    main = cp["synth"] if cp.has_section("synth") else {}
    fields = []
    shares: dict[str, dict[str, float]] = {}
    quality: dict[str, float] = {}
    try:
        for name in cp.sections():
            sec = cp[name]
            if name.startswith("field:"):
                fields.append(
                    FieldProfile(
                        name.split(":", 1)[1].strip(),
                        sec.getint("n_records"),
                        sec.getfloat("mu"),
                        sec.getfloat("sigma"),
                        sec.getfloat("zero_prob", 0.0),
                    )
                )
            elif name.startswith("country:"):
                code = name.split(":", 1)[1].strip()
                shares[code] = _parse_shares(sec.get("shares", ""))
                quality[code] = sec.getfloat("quality_shift", 0.0)
        mix = CountryMix(
            shares=shares,
            quality_shift=quality,
            collab_prob=float(main.get("collab_prob", 0.0)),
            collab_boost=float(main.get("collab_boost", 0.0)),
            tri_prob=float(main.get("tri_prob", 0.0)),
            rest_code=main.get("rest_code", "ROW"),
        )
        years = tuple(int(y) for y in str(main.get("years", "2019")).replace(",", " ").split())
        date = main.get("retrieval_date")
        return SynthSpec(
            fields=tuple(fields),
            mix=mix,
            years=years,
            seed=int(main.get("seed", 0)) if seed is None else seed,
            retrieval_date=dt.date.fromisoformat(date) if date else None,
            label=main.get("label", "synthetic"),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"bad synth spec {path}: {exc}") from None


# --------------------------------------------------------------------------
# Count tables


def load_strata(path: str | Path) -> Corpus:
    """Expand a count table into a corpus.

    Columns: count, year, doctype, citations, countries, categories; each row
    stands for ``count`` identical records.  Leading ``# key=value`` lines set
    retrieval_date and label.  Ids are ``r0``, ``r1``, ... in row order.
    """
    path = Path(path)
    meta: dict[str, str] = {}
    counts, years, dtypes, cites, ctry, cats = [], [], [], [], [], []
    with path.open(newline="", encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, value = ln[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        else:
            body.append(ln)
    for row, raw in enumerate(csv.DictReader(body), start=1):
        try:
            counts.append(int(raw["count"]))
            years.append(int(raw["year"]))
            dtypes.append(_DOCTYPE_CODES[DocType.parse(raw["doctype"])])
            cites.append(int(raw["citations"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise LoadError(f"bad stratum: {exc}", row) from None
        ctry.append([s for s in (raw.get("countries") or "").split(LIST_SEP) if s])
        cats.append([s for s in (raw.get("categories") or "").split(LIST_SEP) if s])
    reps = np.asarray(counts, dtype=np.int64)
    n = int(reps.sum())
    ids = np.empty(n, dtype=object)
    ids[:] = [f"r{j}" for j in range(n)]

    def expand(lists):
        vocab: dict[str, int] = {}
        codes = [[vocab.setdefault(s, len(vocab)) for s in lst] for lst in lists]
        lens = np.repeat([len(c) for c in codes], reps)
        # per-stratum code block tiled count times
        flat = np.concatenate(
            [np.tile(np.asarray(c, np.int64), int(r)) for c, r in zip(codes, reps) if c and r]
            or [np.zeros(0, np.int64)]
        )
        return CodeLists.from_arrays(tuple(vocab), lens, flat)

    date = meta.get("retrieval_date")
    return Corpus(
        ids=ids,
        years=np.repeat(np.asarray(years, np.int64), reps),
        doctypes=np.repeat(np.asarray(dtypes, np.int8), reps),
        citations=np.repeat(np.asarray(cites, np.int64), reps),
        countries=expand(ctry),
        categories=expand(cats),
        retrieval_date=dt.date.fromisoformat(date) if date else None,
        label=meta.get("label", path.name),
    )


# --------------------------------------------------------------------------
# Normalisation divergence


@dataclass(frozen=True)
class FieldDivergence:
    category: str
    n: int
    raw_share: float
    refined_share: float

    @property
    def gap(self) -> float:
        return self.raw_share - self.refined_share


@dataclass(frozen=True)
class CountryDivergence:
    country: str
    n: float
    raw_pp: float
    refined_pp: float


@dataclass(frozen=True)
class DivergenceReport:
    k_percent: float
    raw_top_size: int
    refined_top_size: int
    identical_selection: bool
    fields: tuple[FieldDivergence, ...]
    countries: tuple[CountryDivergence, ...]


def divergence_report(
    corpus: Corpus,
    countries: Sequence[str],
    k_percent=1,
    scheme: PercentileScheme | str = PercentileScheme.MID_FRACTION,
    m: CountingMethod | str = CountingMethod.WHOLE,
) -> DivergenceReport:
    """Raw citation top class versus the category-refined top class.

    Ranks are computed within each record's (single) category and divided
    by that category's mean rank before selecting the top k%.
    """
    v = corpus.default_view()
    cats = corpus.categories
    if (cats.lengths[v.rows] != 1).any():
        raise DataError("divergence report needs exactly one category per record")
    labels = np.asarray(cats.vocab, dtype=object)[cats.idx[cats.ptr[v.rows]]]
    t = top_class_threshold(v, k_percent)
    raw_mask = v.citations >= t.citation_cutoff
    ranks = grouped_percentile_ranks(v, labels, scheme)
    refined = esi_refined_ranks(ranks, labels)
    _, refined_rows = refined_top_rows(refined, v, k_percent)
    refined_mask = np.isin(v.rows, refined_rows)
    fields = []
    for cat in cats.vocab:
        in_cat = labels == cat
        if not in_cat.any():
            continue
        fields.append(
            FieldDivergence(
                cat,
                int(in_cat.sum()),
                float((in_cat & raw_mask).sum() / raw_mask.sum()),
                float((in_cat & refined_mask).sum() / refined_mask.sum()),
            )
        )
    rows = []
    for code in countries:
        ent = Entity.country(code)
        size = float(entity_size(v, ent, m))
        rows.append(
            CountryDivergence(
                code,
                size,
                raw_pp_topk(v, ent, k_percent, m),
                refined_pp_topk(v, refined, ent, k_percent, m),
            )
        )
    return DivergenceReport(
        float(k_percent),
        int(raw_mask.sum()),
        int(refined_mask.sum()),
        bool(np.array_equal(raw_mask, refined_mask)),
        tuple(fields),
        tuple(rows),
    )


def normalization_divergence_experiment(
    spec: SynthSpec,
    k_percent=1,
    scheme: PercentileScheme | str = PercentileScheme.MID_FRACTION,
) -> DivergenceReport:
    """Generate ``spec`` and compare raw and refined top-k% selections."""
    return divergence_report(generate(spec), spec.mix.countries, k_percent, scheme)
