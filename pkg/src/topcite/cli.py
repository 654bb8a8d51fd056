"""Command-line front end.

    topcite indicators --input world.csv --entities CN,US --blocs blocs.csv
    topcite compare --input world.csv --categories VIR,ENG_BM --entities CN,US
    topcite simulate --spec two_fields.ini --corpus-out synth.csv

Exit status: 0 success, 1 data or computation error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .corpus import (
    DEFAULT_DOCTYPES,
    Corpus,
    CorpusView,
    DataError,
    DocType,
    Entity,
    SubsetFilter,
    categories as category_filter,
    countries as country_filter,
    load_bloc_mapping,
    load_corpus,
    resolve_entities,
    validate_corpus,
    write_corpus,
    years as year_filter,
    DoctypeIn,
)
from .decompose import category_comparison, collaboration_classes, national_trend
from .indicators import (
    CountingMethod,
    broad_category_labels,
    entity_size,
    esi_refined_ranks,
    indicator_reports,
    raw_pp_topk,
    refined_pp_topk,
)
from .percentile import (
    PercentileScheme,
    grouped_percentile_ranks,
    pearson,
    top_class_threshold,
)

COMMANDS = ("ingest", "threshold", "indicators", "compare", "trend", "collab", "refine", "simulate")


@dataclass
class CommandPlan:
    command: str
    inputs: list[str] = field(default_factory=list)
    input_format: str | None = None
    k_percent: float = 1.0
    counting: CountingMethod = CountingMethod.WHOLE
    scheme: PercentileScheme | None = None
    doctypes: frozenset[DocType] = DEFAULT_DOCTYPES
    entities: list[str] = field(default_factory=list)
    blocs: str | None = None
    categories: list[str] = field(default_factory=list)
    years: list[int] = field(default_factory=list)
    countries: list[str] = field(default_factory=list)
    format: str = "csv"
    output: str | None = None
    workers: int = 1
    seed: int | None = None
    spec: str | None = None
    corpus_out: str | None = None
    normalized_out: str | None = None
    broad_map: str | None = None
    mncs: bool = False


@dataclass
class OutputTable:
    title: str
    columns: list[str]
    rows: list[list]
    footnotes: list[str] = field(default_factory=list)
    decimals: dict[str, int] = field(default_factory=dict)


# --------------------------------------------------------------------------
# Argument parsing


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in _csv_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _doctype_list(text: str) -> frozenset[DocType]:
    try:
        return frozenset(DocType.parse(t) for t in _csv_list(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _k(text: str) -> float:
    try:
        k = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0 < k < 100:
        raise argparse.ArgumentTypeError("k must lie in (0, 100)")
    return k


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", action="append", default=[], metavar="PATH",
                        help="corpus file; for trend also YEAR=PATH (repeatable)")
    common.add_argument("--input-format", choices=["delimited", "record-per-line", "strata"])
    common.add_argument("--k", type=_k, default=1.0, help="top-k percent (default 1)")
    common.add_argument("--counting", choices=[m.value for m in CountingMethod], default="whole")
    common.add_argument("--scheme", choices=[s.value for s in PercentileScheme])
    common.add_argument("--doctypes", type=_doctype_list, default=DEFAULT_DOCTYPES)
    common.add_argument("--entities", type=_csv_list, default=[])
    common.add_argument("--blocs", metavar="PATH", help="country_code,bloc_code mapping")
    common.add_argument("--categories", type=_csv_list, default=[])
    common.add_argument("--years", type=_int_list, default=[])
    common.add_argument("--countries", type=_csv_list, default=[])
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--output", metavar="PATH")
    common.add_argument("--workers", type=_positive_int, default=1)

    parser = argparse.ArgumentParser(prog="topcite", description="Percentile-rank citation indicators.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="validate and normalise a corpus file").add_argument(
        "--normalized-out", metavar="PATH"
    )
    sub.add_parser("threshold", parents=[common], help="top-k%% citation cutoffs (per year with --years)")
    p = sub.add_parser("indicators", parents=[common], help="N, P-top, PP-top, I3, %%I3 per entity")
    p.add_argument("--mncs", action="store_true", help="add mean normalised citation score column")
    sub.add_parser("compare", parents=[common], help="two entities within each category")
    sub.add_parser("trend", parents=[common], help="PP-top per publication year")
    sub.add_parser("collab", parents=[common], help="PP-top per bloc collaboration class")
    p = sub.add_parser("refine", parents=[common], help="raw versus category-refined PP-top")
    p.add_argument("--broad-map", metavar="PATH", help="category_code,broad_code mapping")
    p = sub.add_parser("simulate", parents=[common], help="synthetic corpus and divergence report")
    p.add_argument("--spec", metavar="PATH")
    p.add_argument("--seed", type=int)
    p.add_argument("--corpus-out", metavar="PATH")
    return parser


def parse_args(argv: Sequence[str] | None) -> CommandPlan:
    parser = build_parser()
    ns = parser.parse_args(argv)
    plan = CommandPlan(
        command=ns.command,
        inputs=ns.input,
        input_format=ns.input_format,
        k_percent=ns.k,
        counting=CountingMethod(ns.counting),
        scheme=PercentileScheme(ns.scheme) if ns.scheme else None,
        doctypes=ns.doctypes,
        entities=ns.entities,
        blocs=ns.blocs,
        categories=ns.categories,
        years=ns.years,
        countries=ns.countries,
        format=ns.format,
        output=ns.output,
        workers=ns.workers,
        seed=getattr(ns, "seed", None),
        spec=getattr(ns, "spec", None),
        corpus_out=getattr(ns, "corpus_out", None),
        normalized_out=getattr(ns, "normalized_out", None),
        broad_map=getattr(ns, "broad_map", None),
        mncs=getattr(ns, "mncs", False),
    )
    if plan.command == "simulate":
        if not plan.spec:
            parser.error("simulate requires --spec")
    elif not plan.inputs:
        parser.error(f"{plan.command} requires --input")
    if plan.command != "trend" and len(plan.inputs) > 1:
        parser.error(f"{plan.command} takes a single --input")
    if plan.command == "compare":
        if not plan.categories:
            parser.error("compare requires --categories")
        if len(plan.entities) != 2:
            parser.error("compare requires exactly two --entities")
    if plan.command in ("trend", "collab", "refine") and not plan.entities:
        parser.error(f"{plan.command} requires --entities")
    return plan


# --------------------------------------------------------------------------
# Execution helpers


def _load(path: str, fmt: str | None) -> Corpus:
    from .synth import load_strata

    if fmt == "strata" or (fmt is None and path.endswith(".strata.csv")):
        return load_strata(path)
    return load_corpus(path, format=fmt)


def _view(c: Corpus, plan: CommandPlan, use_categories: bool = True) -> CorpusView:
    f: SubsetFilter = DoctypeIn(frozenset(plan.doctypes))
    if plan.years:
        f = f & year_filter(*plan.years)
    if plan.countries:
        f = f & country_filter(*plan.countries)
    if use_categories and plan.categories:
        f = f & category_filter(*plan.categories)
    return c.filter(f)


def _entities(plan: CommandPlan) -> list[Entity]:
    blocs = load_bloc_mapping(plan.blocs) if plan.blocs else None
    return resolve_entities(plan.entities, blocs)


def _scheme(plan: CommandPlan, default=PercentileScheme.STRICT_BELOW) -> PercentileScheme:
    return plan.scheme or default


def _threshold_note(t) -> str:
    note = (
        f"top-{t.k_percent:g}% cutoff: {t.citation_cutoff} citations "
        f"(nominal rank {t.nominal_rank} of {t.reference_n}, class size {t.actual_size})"
    )
    if t.actual_size > t.nominal_rank:
        note += f"; {t.actual_size - t.nominal_rank} extra records tied at the cutoff"
    return note


def _run_ingest(plan: CommandPlan) -> list[OutputTable]:
    c = _load(plan.inputs[0], plan.input_format)
    rep = validate_corpus(c)
    if plan.normalized_out:
        write_corpus(c, plan.normalized_out)
    rows = [
        ["records", rep.n],
        ["empty_countries", rep.empty_countries],
        ["empty_categories", rep.empty_categories],
        ["doctype_other", rep.other_doctype],
    ]
    return [OutputTable("validation", ["metric", "value"], rows, list(rep.notes))]


def _run_threshold(plan: CommandPlan) -> list[OutputTable]:
    c = _load(plan.inputs[0], plan.input_format)
    retrieval_year = c.retrieval_date.year if c.retrieval_date else None
    cols = ["subset", "year", "window_length", "n", "k", "nominal_rank", "citation_cutoff", "actual_size"]
    rows, notes = [], []
    if plan.years:
        base = _view(c, CommandPlan(**{**plan.__dict__, "years": []}))
        for y in plan.years:
            v = base.refine(year_filter(y))
            if v.n == 0:
                raise DataError(f"no records for year {y}")
            t = top_class_threshold(v, plan.k_percent, workers=plan.workers)
            window = retrieval_year - y if retrieval_year is not None else None
            rows.append([f"year={y}", y, window, v.n, plan.k_percent, t.nominal_rank, t.citation_cutoff, t.actual_size])
            if t.actual_size > t.nominal_rank:
                notes.append(f"year {y}: " + _threshold_note(t))
        windows = [r[2] for r in rows]
        if len(rows) >= 3 and None not in windows:
            try:
                r = pearson(windows, [row[6] for row in rows])
                notes.append(f"pearson(window_length, citation_cutoff) = {r:.4f}")
            except ValueError as exc:
                notes.append(f"pearson not computed: {exc}")
    else:
        v = _view(c, plan)
        t = top_class_threshold(v, plan.k_percent, workers=plan.workers)
        rows.append(["all", None, None, v.n, plan.k_percent, t.nominal_rank, t.citation_cutoff, t.actual_size])
        if t.actual_size > t.nominal_rank:
            notes.append(_threshold_note(t))
    return [OutputTable("thresholds", cols, rows, notes)]


def _run_indicators(plan: CommandPlan) -> list[OutputTable]:
    c = _load(plan.inputs[0], plan.input_format)
    v = _view(c, plan)
    res = indicator_reports(
        v,
        _entities(plan),
        plan.k_percent,
        plan.counting,
        _scheme(plan),
        with_mncs=plan.mncs,
        workers=plan.workers,
    )
    cols = ["label", "n", "p_top", "expected", "pp_top", "i3", "pct_i3"]
    if plan.mncs:
        cols.append("mncs")
    rows = []
    for rep in (*res.entities, res.world):
        row = [rep.label, rep.n, rep.p_topk, rep.expected, rep.pp_topk, rep.i3, rep.pct_i3]
        if plan.mncs:
            row.append(rep.mncs)
        rows.append(row)
    notes = [_threshold_note(res.threshold), f"counting: {res.counting.value}"]
    return [OutputTable("indicators", cols, rows, notes, {"pp_top": 2, "pct_i3": 2, "mncs": 3})]


def _run_compare(plan: CommandPlan) -> list[OutputTable]:
    c = _load(plan.inputs[0], plan.input_format)
    ents = _entities(plan)
    tab = category_comparison(
        c, plan.categories, ents, plan.k_percent, plan.counting, plan.doctypes, plan.workers
    )
    a, b = tab.entities
    cols = ["category", "n_total", f"n_{a}", f"n_{b}", f"p_top_{a}", f"p_top_{b}",
            f"pp_{a}", f"pp_{b}", "z", "significant_05", "cutoff"]
    rows = [
        [r.category, r.n_total, r.n_entity1, r.n_entity2, r.p_top_1, r.p_top_2,
         r.pp_1, r.pp_2, r.z, r.significant_05, r.cutoff]
        for r in tab.rows
    ]
    return [OutputTable("comparison", cols, rows, list(tab.footnotes), {f"pp_{a}": 2, f"pp_{b}": 2, "z": 3})]


def _run_trend(plan: CommandPlan) -> list[OutputTable]:
    corpora: dict[int, Corpus] = {}
    for item in plan.inputs:
        year, sep, path = item.partition("=")
        if sep and year.strip().isdigit():
            corpora[int(year)] = _load(path, plan.input_format)
        else:
            c = _load(item, plan.input_format)
            for y in plan.years or sorted(set(int(x) for x in c.years)):
                corpora[y] = c
    rows = []
    for ent in _entities(plan):
        for pt in national_trend(corpora, ent, plan.k_percent, plan.counting, plan.doctypes, plan.workers):
            rows.append([pt.year, pt.entity, pt.n, pt.p_top, pt.pp, pt.cutoff])
    return [OutputTable("trend", ["year", "entity", "n", "p_top", "pp_top", "cutoff"], rows, [], {"pp_top": 2})]


def _run_collab(plan: CommandPlan) -> list[OutputTable]:
    c = _load(plan.inputs[0], plan.input_format)
    v = _view(c, plan)
    classes = collaboration_classes(v, _entities(plan), k_percent=plan.k_percent, workers=plan.workers)
    rows = [[r.label, r.n, r.p_top, r.expected, r.pp] for r in classes]
    return [OutputTable("collaboration", ["class", "n", "p_top", "expected", "pp_top"], rows, [], {"pp_top": 2})]


def _read_mapping(path: str) -> dict[str, str]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if rows and rows[0][0].strip() in ("category_code", "category"):
        rows = rows[1:]
    return {r[0].strip(): r[1].strip() for r in rows if len(r) >= 2}


def _run_refine(plan: CommandPlan) -> list[OutputTable]:
    c = _load(plan.inputs[0], plan.input_format)
    v = _view(c, plan)
    categorised = v.rows[c.categories.lengths[v.rows] > 0]
    ref = CorpusView(c, v.filter, categorised)
    mapping = _read_mapping(plan.broad_map) if plan.broad_map else None
    labels = broad_category_labels(c, ref.rows, mapping)
    ranks = grouped_percentile_ranks(ref, labels, _scheme(plan))
    refined = esi_refined_ranks(ranks, labels)
    rows = []
    for ent in _entities(plan):
        rows.append([
            ent.name,
            float(entity_size(ref, ent, plan.counting)),
            raw_pp_topk(ref, ent, plan.k_percent, plan.counting),
            refined_pp_topk(ref, refined, ent, plan.k_percent, plan.counting),
        ])
    notes = [f"broad category {k}: mean rank {m:.4f}" for k, m in sorted(refined.category_means.items())]
    if len(categorised) < v.n:
        notes.append(f"{v.n - len(categorised)} records without category left out")
    return [OutputTable("refined", ["entity", "n", "raw_pp_top", "refined_pp_top"], rows, notes,
                        {"raw_pp_top": 2, "refined_pp_top": 2})]


def _run_simulate(plan: CommandPlan) -> list[OutputTable]:
    from .synth import divergence_report, generate, load_spec

    spec = load_spec(plan.spec, seed=plan.seed)
    corpus = generate(spec)
    if plan.corpus_out:
        write_corpus(corpus, plan.corpus_out)
    rep = divergence_report(corpus, spec.mix.countries, plan.k_percent, _scheme(plan, PercentileScheme.MID_FRACTION))
    fields_tab = OutputTable(
        "fields",
        ["category", "n", "raw_share", "refined_share", "gap"],
        [[f.category, f.n, f.raw_share, f.refined_share, f.gap] for f in rep.fields],
        [
            f"records: {len(corpus)}, seed: {spec.seed}",
            f"raw top class {rep.raw_top_size}, refined top class {rep.refined_top_size}, "
            f"identical: {rep.identical_selection}",
        ],
        {"raw_share": 4, "refined_share": 4, "gap": 4},
    )
    country_tab = OutputTable(
        "countries",
        ["country", "n", "raw_pp_top", "refined_pp_top"],
        [[r.country, r.n, r.raw_pp, r.refined_pp] for r in rep.countries],
        [],
        {"raw_pp_top": 2, "refined_pp_top": 2},
    )
    return [fields_tab, country_tab]


_RUNNERS = {
    "ingest": _run_ingest,
    "threshold": _run_threshold,
    "indicators": _run_indicators,
    "compare": _run_compare,
    "trend": _run_trend,
    "collab": _run_collab,
    "refine": _run_refine,
    "simulate": _run_simulate,
}


# --------------------------------------------------------------------------
# Rendering


def _fmt(value, decimals: int | None) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        if decimals is not None:
            return f"{value:.{decimals}f}"
        if value.is_integer():
            return str(int(value))
        return f"{value:.6f}".rstrip("0").rstrip(".")
    return str(value)


def render_csv(tables: Sequence[OutputTable]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for i, tab in enumerate(tables):
        if i:
            buf.write("\n")
        writer.writerow(tab.columns)
        for row in tab.rows:
            writer.writerow([_fmt(v, tab.decimals.get(col)) for col, v in zip(tab.columns, row)])
        for note in tab.footnotes:
            buf.write(f"# {note}\n")
    return buf.getvalue()


def _json_value(v):
    if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
        return None
    return v


def render_json(tables: Sequence[OutputTable]) -> str:
    doc = {
        "tables": [
            {
                "title": t.title,
                "columns": t.columns,
                "rows": [{c: _json_value(v) for c, v in zip(t.columns, row)} for row in t.rows],
                "footnotes": t.footnotes,
            }
            for t in tables
        ]
    }
    return json.dumps(doc, indent=2) + "\n"


def render(tables: Sequence[OutputTable], fmt: str) -> str:
    return render_json(tables) if fmt == "json" else render_csv(tables)


def execute(plan: CommandPlan) -> tuple[int, list[OutputTable]]:
    """Run a plan, write its tables, and return (exit status, tables)."""
    try:
        tables = _RUNNERS[plan.command](plan)
    except (DataError, OSError, ValueError) as exc:
        print(f"topcite {plan.command}: error: {exc}", file=sys.stderr)
        return 1, []
    text = render(tables, plan.format)
    if plan.output:
        Path(plan.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0, tables


def main(argv: Sequence[str] | None = None) -> int:
    try:
        plan = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    status, _ = execute(plan)
    return status
