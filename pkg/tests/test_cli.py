"""Command-line interface: formats, exit codes, determinism."""
import json

import numpy as np
import pytest

import eosdesign as ed
from eosdesign.cli import REPORT_HEADER, main


def run(*argv, capsys=None):
    code = main(list(argv))
    out = capsys.readouterr().out if capsys else ""
    return code, out


def make_instance_file(tmp_path, ni=3, nj=6, seed=14, family="sqrt", name="demo"):
    inst = ed.generate_instance(ni, nj, seed=seed, family=family, name=name)
    path = tmp_path / f"{name}.inst"
    ed.write_instance(inst, path)
    return path


def test_generate_single(tmp_path, capsys):
    out_path = tmp_path / "g.inst"
    code, _ = run("generate", "--facilities", "4", "--customers", "9",
                  "--seed", "5", "--family", "sqrt", "--out", str(out_path),
                  capsys=capsys)
    assert code == 0
    inst = ed.read_instance(out_path)
    assert inst.n_facilities == 4 and inst.n_customers == 9
    assert inst.cost_family == "square_root"


def test_generate_deterministic_bytes(tmp_path, capsys):
    p1, p2 = tmp_path / "a.inst", tmp_path / "b.inst"
    for p in (p1, p2):
        run("generate", "--facilities", "3", "--customers", "5", "--seed", "9",
            "--out", str(p), capsys=capsys)
    assert p1.read_bytes() == p2.read_bytes()


def test_generate_suite(tmp_path, capsys):
    code, _ = run("generate", "--suite", "paper", "--seed", "1",
                  "--outdir", str(tmp_path), capsys=capsys)
    assert code == 0
    files = sorted(tmp_path.glob("*.inst"))
    assert len(files) == 27
    sizes = {(i.n_facilities, i.n_customers) for i in map(ed.read_instance, files)}
    assert (10, 50) in sizes and (30, 150) in sizes and (20, 100) in sizes


def test_generate_needs_counts(tmp_path, capsys):
    code, _ = run("generate", "--seed", "2", capsys=capsys)
    assert code == 1


def test_solve_row_format(tmp_path, capsys):
    path = make_instance_file(tmp_path)
    code, out = run("solve", str(path), capsys=capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == REPORT_HEADER
    fields = lines[1].split(",")
    assert len(fields) == 13
    assert fields[0] == "demo" and fields[1] == "3" and fields[2] == "6"
    assert all(f.endswith("%") for f in fields[4:8])
    shares = [int(f.rstrip("%")) for f in fields[4:8]]
    assert 98 <= sum(shares) <= 102  # whole-percent rounding
    float(fields[3])  # money parses
    assert float(fields[10]) <= 0.01  # achieved gap


def test_solve_json(tmp_path, capsys):
    path = make_instance_file(tmp_path)
    code, out = run("solve", str(path), "--json", capsys=capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["instance"] == "demo"
    assert doc["converged"] is True
    assert doc["opening_share"] + doc["serving_share"] + doc["access_share"] \
        + doc["waiting_share"] == pytest.approx(100.0)
    assert "cpu_ms" in doc


def test_solve_trace_and_report_determinism(tmp_path, capsys):
    # large enough that --parallel 4 really splits facilities across threads
    path = make_instance_file(tmp_path, ni=9, nj=16, seed=3)
    outs = []
    for tag in ("one", "two"):
        trace = tmp_path / f"trace-{tag}.csv"
        report = tmp_path / f"report-{tag}.csv"
        code, _ = run("solve", str(path), "--trace", str(trace),
                      "--out", str(report), "--no-cpu-time", "--parallel", "4",
                      capsys=capsys)
        assert code == 0
        outs.append((trace.read_bytes(), report.read_bytes()))
    assert outs[0] == outs[1]


def test_solve_cpu_time_column_masked(tmp_path, capsys):
    path = make_instance_file(tmp_path)
    _, out = run("solve", str(path), "--no-cpu-time", capsys=capsys)
    assert out.strip().splitlines()[1].split(",")[9] == "-"
    _, out = run("solve", str(path), capsys=capsys)
    int(out.strip().splitlines()[1].split(",")[9])  # real milliseconds


def test_solve_exit_code_iteration_limited(tmp_path, capsys):
    path = make_instance_file(tmp_path)
    code, _ = run("solve", str(path), "--max-iters", "2", capsys=capsys)
    assert code == 2


def test_solve_missing_file_exit_one(capsys):
    code, _ = run("solve", "/nonexistent/foo.inst", capsys=capsys)
    assert code == 1


def test_usage_error_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve"])  # missing positional
    assert exc.value.code == 1


def test_bad_instance_content_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.inst"
    bad.write_text("eosdesign-instance 1\nname x\nfamily linear\n"
                   "facilities 1\ncustomers 1\n"
                   "facility 0 1.0 1.0 1.0 4.0\ncustomer 0 -3.0\naccess 0 5.0\n")
    code, _ = run("solve", str(bad), capsys=capsys)
    assert code == 1


def test_compare_three_rows_per_instance(tmp_path, capsys):
    path = make_instance_file(tmp_path, ni=2, nj=5, seed=4)
    code, out = run("compare", str(path), capsys=capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 4
    fams = [line.split(",")[1] for line in lines[1:]]
    assert fams == ["linear", "square_root", "fractional"]


def test_oracle_command(tmp_path, capsys):
    path = make_instance_file(tmp_path, ni=2, nj=4, seed=4)
    code, out = run("oracle", str(path), capsys=capsys)
    assert code == 0
    assert "exact optimum" in out
    code, out = run("oracle", str(path), "--linearized", capsys=capsys)
    assert code == 0
    assert "linearized optimum" in out


def test_oracle_size_guard_exit_one(tmp_path, capsys):
    path = make_instance_file(tmp_path, ni=6, nj=4, seed=4)
    code, _ = run("oracle", str(path), capsys=capsys)
    assert code == 1


def test_linearize_dump(tmp_path, capsys):
    out_path = tmp_path / "pieces.csv"
    code, _ = run("linearize-dump", "--family", "sqrt", "--epsilon", "0.1",
                  "--lo", "1", "--hi", "100", "--out", str(out_path),
                  capsys=capsys)
    assert code == 0
    lines = out_path.read_text().strip().splitlines()
    assert lines[0] == "k,tangent_point,breakpoint,slope,intercept"
    assert len(lines) > 2
    first = lines[1].split(",")
    assert int(first[0]) == 0 and float(first[3]) > 0


def test_convert_command(tmp_path, capsys):
    legacy = tmp_path / "legacy.txt"
    legacy.write_text("2 3\n100 800\n120 900\n4 5 6\n1 2 3\n7 8 9\n")
    out_path = tmp_path / "converted.inst"
    code, _ = run("convert", str(legacy), str(out_path), "--seed", "3",
                  "--family", "fractional", capsys=capsys)
    assert code == 0
    inst = ed.read_instance(out_path)
    assert inst.cost_family == "fractional"
    assert inst.fixed_costs.tolist() == [800.0, 900.0]


def test_compare_trend_on_generated_instances(tmp_path, capsys):
    # economies-of-scale trend through the compare command: open counts under
    # sqrt/fractional at most linear's on >= 80% of instances, waiting share
    # under fractional at most linear's on a majority
    paths = []
    for k in range(5):
        inst = ed.generate_instance(8, 25, seed=600 + k, name=f"c{k}")
        p = tmp_path / f"c{k}.inst"
        ed.write_instance(inst, p)
        paths.append(str(p))
    code, out = run("compare", *paths, capsys=capsys)
    assert code == 0
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    by_inst = {}
    for name, family, total, wait, n_open, cap in rows:
        by_inst.setdefault(name, {})[family] = (
            float(total), int(wait.rstrip("%")), int(n_open), float(cap))
    open_ok = wait_ok = 0
    for vals in by_inst.values():
        if (vals["square_root"][2] <= vals["linear"][2]
                and vals["fractional"][2] <= vals["linear"][2]):
            open_ok += 1
        if vals["fractional"][1] <= vals["linear"][1]:
            wait_ok += 1
    assert open_ok >= 4  # >= 80% of 5
    assert wait_ok >= 3


def test_report_row_average_capacity(tmp_path, capsys):
    path = make_instance_file(tmp_path, ni=4, nj=10, seed=9, name="cap")
    code, out = run("solve", str(path), "--json", capsys=capsys)
    doc = json.loads(out)
    rep = ed.solve(ed.read_instance(path))
    sol = rep.solution
    assert doc["avg_capacity"] == pytest.approx(
        float(sol.capacity[sol.open].mean()))
    assert doc["open_facilities"] == int(sol.open.sum())


def test_module_invocation_subprocess(tmp_path):
    import subprocess
    import sys
    inst = ed.generate_instance(2, 4, seed=12, name="sub")
    path = tmp_path / "sub.inst"
    ed.write_instance(inst, path)
    cmd = [sys.executable, "-m", "eosdesign.cli", "solve", str(path), "--no-cpu-time"]
    r1 = subprocess.run(cmd, capture_output=True, text=True)
    r2 = subprocess.run(cmd, capture_output=True, text=True)
    assert r1.returncode in (0, 2)
    assert r1.stdout == r2.stdout


def test_generate_uniform_access_mode(tmp_path, capsys):
    out_path = tmp_path / "u.inst"
    code, _ = run("generate", "--facilities", "3", "--customers", "4",
                  "--seed", "2", "--access-mode", "uniform",
                  "--access-range", "1", "30", "--out", str(out_path),
                  capsys=capsys)
    assert code == 0
    inst = ed.read_instance(out_path)
    assert inst.access_cost.min() >= 1.0 and inst.access_cost.max() <= 30.0
