import csv
import io
from fractions import Fraction
from importlib import resources

import pytest

from racetrack_rf.cli import main
from racetrack_rf.reports import CSV_COLUMNS, SRAM, SramBaseline, format_number, read_rows, render_report
from racetrack_rf.synthetic import demo_workload
from racetrack_rf.trace import serialize_trace

DATA = resources.files("racetrack_rf") / "data"
LISTING = str(DATA / "demo.lst")
TRACE = str(DATA / "demo.trace")


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(d):
    assert run("cfg", "--listing", LISTING, "--trace", TRACE, "--out", d / "demo.json") == 0
    assert run("recommend", "--cfg", d / "demo.json", "--window", 20, "--out", d / "demo.rec") == 0
    assert run("simulate", "--trace", TRACE, "--rec-table", d / "demo.rec", "--window", 20, "--out", d / "row.csv") == 0
    assert run("report", d / "row.csv", "--out", d / "report.txt") == 0
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_bundled_trace_matches_generator():
    assert (DATA / "demo.trace").read_text() == serialize_trace(demo_workload().trace)


def test_full_pipeline(tmp_path):
    out = pipeline(tmp_path)
    rows = list(csv.DictReader(io.StringIO(out["row.csv"].decode())))
    assert len(rows) == 1
    assert tuple(rows[0]) == CSV_COLUMNS
    assert rows[0]["benchmark"] == "demo" and rows[0]["window_size"] == "20"
    assert b"STATIC_WORST/REC" in out["report.txt"]


def test_pipeline_deterministic(tmp_path):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    assert pipeline(tmp_path / "a") == pipeline(tmp_path / "b")


def test_recommend_from_listing_equals_from_cfg(tmp_path):
    run("cfg", "--listing", LISTING, "--trace", TRACE, "--out", tmp_path / "c.json")
    run("recommend", "--cfg", tmp_path / "c.json", "--out", tmp_path / "a.rec")
    run("recommend", "--listing", LISTING, "--trace", TRACE, "--out", tmp_path / "b.rec")
    assert (tmp_path / "a.rec").read_text() == (tmp_path / "b.rec").read_text()


def test_simulate_rec_without_table(tmp_path, capsys):
    assert run("simulate", "--trace", TRACE, "--policy", "rec") != 0
    assert "needs --rec-table" in capsys.readouterr().err


def test_simulate_fingerprint_mismatch(tmp_path, capsys):
    run("recommend", "--listing", LISTING, "--out", tmp_path / "t.rec")
    assert run("simulate", "--trace", TRACE, "--rec-table", tmp_path / "t.rec", "--geometry", "num_aps=4") == 2
    assert "geometry" in capsys.readouterr().err


def test_missing_input(tmp_path, capsys):
    assert run("simulate", "--trace", tmp_path / "nope.trace", "--policy", "static-h") == 2
    assert run("cfg", "--listing", tmp_path / "nope.lst") == 2


def test_parse_error_reported(tmp_path, capsys):
    bad = tmp_path / "bad.trace"
    bad.write_text("I 0 nop S 1:99:0 D -\n")
    assert run("simulate", "--trace", bad, "--policy", "static-h") == 2
    assert "line 1" in capsys.readouterr().err


@pytest.mark.parametrize("policy", ["static-h", "static-v", "lopt"])
def test_single_policy_output(tmp_path, policy):
    assert run("simulate", "--trace", TRACE, "--policy", policy, "--out", tmp_path / "o.txt") == 0
    text = (tmp_path / "o.txt").read_text()
    assert text.startswith(f"policy={policy}\n") and "total_energy=" in text


def test_gen_synthetic_deterministic(tmp_path):
    for name in ("a", "b"):
        assert run("gen", "--count", 3000, "--seed", 5, "--out", tmp_path / f"{name}.trace",
                   "--listing-out", tmp_path / f"{name}.lst") == 0
    assert (tmp_path / "a.trace").read_bytes() == (tmp_path / "b.trace").read_bytes()
    assert (tmp_path / "a.lst").read_bytes() == (tmp_path / "b.lst").read_bytes()
    # the generated pair feeds straight into the pipeline
    assert run("recommend", "--listing", tmp_path / "a.lst", "--trace", tmp_path / "a.trace", "--out", tmp_path / "a.rec") == 0


def test_gen_bundled(tmp_path):
    assert run("gen", "--benchmark", "demo", "--out", tmp_path / "d.trace") == 0
    assert (tmp_path / "d.trace").read_text() == (DATA / "demo.trace").read_text()


def test_sweep_ports(tmp_path):
    out = tmp_path / "aps.csv"
    assert run("sweep", "--listing", LISTING, "--trace", TRACE, "--num-aps", "2,4,8,16,32", "--out", out) == 0
    rows = read_rows(out.open())
    assert [int(r["num_aps"]) for r in rows] == [2, 4, 8, 16, 32]
    shifts = [int(r["recommended_total_shifts"]) for r in rows]
    assert shifts == sorted(shifts, reverse=True)


def test_sweep_parallel_matches_serial(tmp_path):
    args = ["sweep", "--listing", LISTING, "--trace", TRACE, "--num-aps", "2,4,8", "--windows", "10,100"]
    assert run(*args, "--out", tmp_path / "serial.csv") == 0
    assert run(*args, "--jobs", 3, "--out", tmp_path / "parallel.csv") == 0
    assert (tmp_path / "serial.csv").read_bytes() == (tmp_path / "parallel.csv").read_bytes()


def test_sweep_windows(tmp_path):
    out = tmp_path / "win.csv"
    assert run("sweep", "--listing", LISTING, "--trace", TRACE, "--windows", "10,100,1000,2000", "--out", out) == 0
    assert [r["window_size"] for r in read_rows(out.open())] == ["10", "100", "1000", "2000"]


def test_sweep_tracks_fixed_capacity(tmp_path, caplog):
    out = tmp_path / "tracks.csv"
    assert run("sweep", "--listing", LISTING, "--trace", TRACE, "--num-tracks", "8,16,32,64,128,256",
               "--num-aps", "8", "--out", out) == 0
    rows = read_rows(out.open())
    assert [int(r["num_tracks"]) for r in rows] == [8, 16, 32, 64, 128, 256]
    assert all(int(r["num_tracks"]) * int(r["track_length"]) == 2048 for r in rows)


def test_sweep_skips_infeasible(tmp_path, caplog):
    out = tmp_path / "s.csv"
    assert run("sweep", "--listing", LISTING, "--trace", TRACE, "--num-aps", "1,2,128", "--out", out) == 0
    assert [r["num_aps"] for r in read_rows(out.open())] == ["2"]
    assert "skipping" in caplog.text


def test_sweep_needs_workload(capsys):
    assert run("sweep") == 2


def test_sweep_row_reproducible_by_simulate(tmp_path):
    run("sweep", "--listing", LISTING, "--trace", TRACE, "--num-aps", 4, "--windows", 50, "--out", tmp_path / "s.csv")
    run("recommend", "--listing", LISTING, "--trace", TRACE, "--geometry", "num_aps=4", "--window", 50,
        "--out", tmp_path / "t.rec")
    run("simulate", "--trace", TRACE, "--geometry", "num_aps=4", "--window", 50, "--rec-table", tmp_path / "t.rec",
        "--out", tmp_path / "r.csv")
    assert read_rows((tmp_path / "s.csv").open()) == read_rows((tmp_path / "r.csv").open())


def _row(**over):
    row = {c: "0" for c in CSV_COLUMNS}
    row["benchmark"] = "x"
    row.update({k: str(v) for k, v in over.items()})
    return row


def test_report_sram_flag():
    text = render_report([_row(num_reads=100, recommended_total_energy=26621, v1_total_energy=50000, v2_total_energy=90000)])
    assert "REC avg energy 266.21 fJ" in text
    assert "below SRAM band" in text
    assert "energy 3.381" in text


def test_report_zero_accesses(tmp_path, caplog):
    p = tmp_path / "z.csv"
    with p.open("w") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        w.writerow(_row())
    assert run("report", p, "--out", tmp_path / "z.txt") == 0
    text = (tmp_path / "z.txt").read_text()
    assert "warning: no register accesses" in text
    assert "avg energy       0.00 fJ" in text
    assert "zero register accesses" in caplog.text


def test_report_malformed(tmp_path, capsys):
    p = tmp_path / "bad.csv"
    p.write_text("benchmark,num_aps\nx,2\n")
    assert run("report", p) == 2
    p.write_text(",".join(CSV_COLUMNS) + "\n" + ",".join(["x"] + ["abc"] * (len(CSV_COLUMNS) - 1)) + "\n")
    assert run("report", p) == 2


def test_sram_constants():
    assert SRAM.read_energy == (390, 710)
    assert SRAM.write_energy == (800, 1570)
    assert SRAM.latency == (164, 254)
    with pytest.raises(ValueError):
        SramBaseline(latency=(Fraction(2), Fraction(1)))
    assert SRAM.energy_flag(500) == "within SRAM band"
    assert SRAM.energy_flag(2000) == "above SRAM band"


def test_format_number():
    assert format_number(Fraction(5)) == "5"
    assert format_number(Fraction(445237, 2)) == "222618.5"
    assert format_number(Fraction(1, 10)) == "0.1"
    assert format_number(Fraction(1, 3)) == repr(1 / 3)
