import csv
import io
import json

import pytest

from topcite.cli import main, parse_args

from conftest import FIXTURES

WORLD = str(FIXTURES / "world_2019.strata.csv")
WINDOWS = str(FIXTURES / "citation_windows.strata.csv")
BLOCS = str(FIXTURES / "blocs.csv")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(lines))))


def test_indicators_csv(capsys):
    code, out, _ = run(capsys, "indicators", "--input", WORLD, "--entities", "CN,US,EU27,EUUK", "--blocs", BLOCS)
    assert code == 0
    rows = {r["label"]: r for r in table(out)}
    assert [rows[k]["pp_top"] for k in ("CN", "US", "EU27", "EUUK", "World")] == ["1.67", "1.62", "1.13", "1.15", "1.00"]
    assert rows["CN"]["n"] == "504695"  # no thousands separator
    assert "# top-1% cutoff: 38 citations" in out


def test_indicators_json_full_precision(capsys):
    code, out, _ = run(capsys, "indicators", "--input", WORLD, "--entities", "CN", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    cn = doc["tables"][0]["rows"][0]
    assert cn["pp_top"] == pytest.approx(8422 / 5046.95, rel=1e-12)
    assert cn["n"] == 504695


def test_compare_and_output_file(capsys, tmp_path):
    dest = tmp_path / "cmp.csv"
    code, out, _ = run(
        capsys, "compare", "--input", WORLD, "--entities", "CN,US",
        "--categories", "VIR,ENG_BM,ENG_MD,BUS_FIN", "--output", str(dest),
    )
    assert code == 0 and out == ""
    rows = {r["category"]: r for r in table(dest.read_text())}
    assert rows["BUS_FIN"]["z"] == "2.129"
    assert rows["BUS_FIN"]["significant_05"] == "true"
    assert rows["VIR"]["pp_US"] == "1.65"


def test_threshold_years(capsys):
    code, out, _ = run(capsys, "threshold", "--input", WINDOWS, "--years", "2015,2016,2017,2018,2019")
    assert code == 0
    rows = table(out)
    assert [r["citation_cutoff"] for r in rows] == ["140", "115", "93", "67", "38"]
    assert "pearson(window_length, citation_cutoff) = 0.9988" in out


def test_trend_forms(capsys):
    code, out, _ = run(capsys, "trend", "--input", f"2019={WINDOWS}", "--input", f"2018={WINDOWS}", "--entities", "CN")
    assert code == 0
    assert [r["year"] for r in table(out)] == ["2018", "2019"]
    code, out, _ = run(capsys, "trend", "--input", WINDOWS, "--entities", "CN,US")
    assert len(table(out)) == 10


def test_collab(capsys):
    code, out, _ = run(capsys, "collab", "--input", WORLD, "--entities", "US,CN,EU27", "--blocs", BLOCS)
    assert code == 0
    labels = [r["class"] for r in table(out)]
    assert labels[0] == "none" and "US+CN" in labels


def test_refine(capsys, tmp_path):
    mapping = tmp_path / "broad.csv"
    mapping.write_text("category_code,broad_code\nENG_BM,ENG\nENG_MD,ENG\nVIR,LIFE\nBUS_FIN,SOC\n")
    code, out, _ = run(capsys, "refine", "--input", WORLD, "--entities", "CN,US", "--broad-map", str(mapping))
    assert code == 0, out
    rows = {r["entity"]: r for r in table(out)}
    assert set(rows) == {"CN", "US"}
    assert "records without category left out" in out


def test_simulate_writes_corpus(capsys, tmp_path):
    dest = tmp_path / "synth.csv"
    spec = str(FIXTURES / "two_fields.ini")
    code, out, _ = run(capsys, "simulate", "--spec", spec, "--seed", "2", "--corpus-out", str(dest))
    assert code == 0
    assert dest.exists()
    fields = {r["category"]: r for r in table(out.split("\n\n")[0])}
    assert float(fields["HI"]["raw_share"]) > 0.9
    code, again, _ = run(capsys, "simulate", "--spec", spec, "--seed", "2")
    assert again == out


def test_ingest(capsys, tmp_path):
    src = tmp_path / "in.jsonl"
    src.write_text('{"id": "a", "year": 2019, "doctype": "Other", "citations": 1, "countries": [], "categories": []}\n')
    dest = tmp_path / "out.csv"
    code, out, _ = run(capsys, "ingest", "--input", str(src), "--normalized-out", str(dest))
    assert code == 0
    assert {r["metric"]: r["value"] for r in table(out)}["doctype_other"] == "1"
    assert "a,2019,Other,1,," in dest.read_text()


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["indicators"],
        ["indicators", "--input", WORLD, "--k", "0"],
        ["indicators", "--input", WORLD, "--k", "abc"],
        ["indicators", "--input", WORLD, "--counting", "half"],
        ["compare", "--input", WORLD, "--entities", "CN"],
        ["compare", "--input", WORLD, "--entities", "CN,US"],
        ["simulate"],
        ["trend", "--input", WORLD],
        ["indicators", "--input", WORLD, "--input", WORLD],
        ["indicators", "--input", WORLD, "--doctypes", "Poster"],
    ],
)
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "usage" in err


def test_data_errors_exit_1(capsys, tmp_path):
    code, _, err = run(capsys, "indicators", "--input", str(tmp_path / "missing.csv"))
    assert code == 1 and "error" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("id,year,doctype,citations,countries,categories\na,2019,Article,-4,,\n")
    code, _, err = run(capsys, "indicators", "--input", str(bad))
    assert code == 1 and "row 1" in err
    code, _, err = run(capsys, "compare", "--input", WORLD, "--entities", "CN,US", "--categories", "NOPE")
    assert code == 1 and "NOPE" in err


def test_worker_count_does_not_change_output(capsys):
    outs = set()
    for w in ("1", "2", "8"):
        code, out, _ = run(capsys, "indicators", "--input", WORLD, "--entities", "CN,US", "--format", "json", "--workers", w)
        outs.add(out)
    assert len(outs) == 1


def test_parse_args_plan():
    plan = parse_args(["indicators", "--input", WORLD, "--k", "10", "--counting", "fractional", "--scheme", "mid"])
    assert plan.k_percent == 10.0
    assert plan.counting.value == "fractional"
    assert plan.scheme.value == "mid"
