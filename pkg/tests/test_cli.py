import csv
import io
import json

import pytest

from dividend_barrier.cli import main, read_config
from dividend_barrier.errors import ConfigError

FAST = ["--nx", "400", "--nt", "400"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_solve_header_and_curves(capsys):
    code, out, err = run(capsys, "solve", "--n-points", "11")
    assert code == 0
    summary = dict(line[2:].split(" = ") for line in err.splitlines() if line.startswith("# "))
    assert float(summary["x_alpha"]) == pytest.approx(4.72, abs=0.01)
    assert float(summary["b0"]) == pytest.approx(198.8677528735, rel=1e-9)
    for k in ("x_beta", "k1", "k2", "k3", "k4"):
        assert k in summary
    data = rows(out)
    assert list(data[0]) == ["x", "f", "g", "a_star"]
    assert len(data) == 11


def test_solve_is_byte_identical(capsys):
    first = run(capsys, "solve", "--n-points", "50")
    assert run(capsys, "solve", "--n-points", "50") == first


def test_empty_range_is_config_error(capsys):
    code, out, err = run(capsys, "solve", "--n-points", "0")
    assert code == 2 and out == "" and "error" in err


def test_bad_params_rejected_before_compute(capsys):
    assert run(capsys, "validate", "--alpha", "9")[0] == 2
    assert run(capsys, "solve", "--format", "xml")[0] == 2
    assert run(capsys, "barrier", "--epsilon", "0")[0] == 2


def test_unsupported_case_label(capsys):
    code, _, err = run(capsys, "solve", "--delta", "0.6")
    assert code == 2 and "CaseII" in err


def test_config_file_and_flag_priority(tmp_path, capsys):
    path = tmp_path / "run.cfg"
    path.write_text("# recipe\nsigma2 = 70  # volatility\nn_points = 3\nformat = json\n")
    code, out, _ = run(capsys, "solve", "--config", str(path), "--n-points", "4")
    assert code == 0
    doc = json.loads(out)
    assert len(doc["records"]) == 4
    assert doc["summary"]["b0"] > 199.0  # larger sigma2 moves b0 up
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert run(capsys, "solve", "--config", str(bad))[0] == 2
    with pytest.raises(ConfigError):
        read_config(str(tmp_path / "missing.cfg"))


def test_json_mirrors_csv(capsys):
    _, text, _ = run(capsys, "sweep", "--variable", "x", "--values", "1,50,150")
    _, js, _ = run(capsys, "sweep", "--variable", "x", "--values", "1,50,150",
                   "--format", "json")
    recs = json.loads(js)["records"]
    for r, c in zip(recs, rows(text)):
        assert {k: repr(float(v)) for k, v in r.items()} == c


def test_single_point_sweep(capsys):
    code, out, _ = run(capsys, "sweep", "--variable", "delta", "--values", "0.2",
                       "--n-points", "1", "--x-min", "50", "--x-max", "50")
    assert code == 0
    data = rows(out)
    assert len(data) == 1 and list(data[0]) == ["delta", "x", "g"]


def test_delta_sweep_decreasing(capsys):
    _, out, _ = run(capsys, "sweep", "--variable", "delta", "--values", "0.1,0.2,0.4",
                    "--n-points", "5", "--x-min", "10")
    data = rows(out)
    by_x = {}
    for r in data:
        by_x.setdefault(r["x"], []).append(float(r["g"]))
    for g in by_x.values():
        assert g[0] > g[1] > g[2]


def test_invalid_sweep_variable(capsys):
    assert run(capsys, "sweep", "--variable", "gamma", "--values", "1")[0] == 2


def test_barrier_slack_and_round_trip(capsys):
    code, out, _ = run(capsys, "barrier", "--epsilon", "0.9", *FAST)
    rec = rows(out)[0]
    assert code == 0 and rec["constrained"] == "false"
    assert float(rec["b_star"]) == float(rec["b0"])
    code, out, _ = run(capsys, "barrier", "--epsilon", "1e-4", *FAST)
    rec = rows(out)[0]
    assert rec["constrained"] == "true"
    _, out2, _ = run(capsys, "barrier", "--epsilon", rec["psi_b_star"], *FAST)
    assert float(rows(out2)[0]["b_star"]) == pytest.approx(float(rec["b_star"]), rel=1e-3)


def test_unattainable_reports_cap(capsys, monkeypatch):
    from dividend_barrier import risk
    monkeypatch.setattr(risk, "SEARCH_CAP_DOUBLINGS", 1)
    code, _, err = run(capsys, "barrier", "--epsilon", "1e-200", *FAST)
    assert code == 3 and "search cap" in err


def test_capital_and_grid_csv(tmp_path, capsys):
    grid = tmp_path / "phi.csv"
    out = tmp_path / "cap.csv"
    code, _, _ = run(capsys, "capital", "--b", "100", "--values", "0.15,0.3", *FAST,
                     "--grid-csv", str(grid), "--out", str(out))
    assert code == 0
    data = rows(out.read_text())
    assert float(data[0]["x"]) > float(data[1]["x"])
    assert grid.read_text().startswith("t,x,phi")


def test_simulate_seeded(tmp_path, capsys):
    args = ["simulate", "--b", "50", "--x", "20", "--T", "1", "--dt", "0.01",
            "--n-paths", "500", "--seed", "9"]
    first = run(capsys, *args)
    assert first[0] == 0 and run(capsys, *args) == first
    paths = tmp_path / "p.csv"
    run(capsys, *args, "--paths-csv", str(paths))
    assert len(paths.read_text().splitlines()) == 501


def test_validate_report(capsys):
    args = ["validate", "--b", "100", "--n-paths", "4000", "--dt", "0.01",
            "--monitoring", "bridge", *FAST, "--format", "json"]
    code, out, _ = run(capsys, *args)
    checks = {r["check"]: r for r in json.loads(out)["records"]}
    assert code == 0
    assert all(r["passed"] for r in checks.values())
    assert {"smooth_fit", "hjb_residual", "pde_vs_mc_ruin_z", "epsilon0_bound"} <= set(checks)
    assert run(capsys, *args) == (code, out, "")
