import csv
import io
import json
import math

import pytest

from relkepler.cli import EXIT_DOMAIN, EXIT_EMPTY, EXIT_OK, SWEEP_COLUMNS, main

T20 = str(20 * math.pi)


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


def test_classify_closed():
    code, out, _ = run("classify", "--h", "0.7", "--L", "1.2")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["class"] == "ClosedNonCircular"
    assert doc["r_star"] == pytest.approx(0.628571, abs=1e-5)
    assert doc["r_min"] == pytest.approx(0.36203, abs=1e-5)
    assert doc["r_max"] == pytest.approx(2.38307, abs=1e-5)


@pytest.mark.parametrize("h,L,tag", [("0", "1", "NoMotion"), ("1.5", "2", "NoClosedOrbit")])
def test_classify_other_cases(h, L, tag):
    code, out, _ = run("classify", "--h", h, "--L", L)
    doc = json.loads(out)
    assert code == EXIT_OK and doc["class"] == tag
    if tag == "NoClosedOrbit":
        assert doc["violated"]


def test_classify_csv_format():
    code, out, _ = run("classify", "--h", "0.7", "--L", "1.2", "--format", "csv")
    rows = dict(csv.reader(io.StringIO(out)))
    assert code == EXIT_OK and rows["class"] == "ClosedNonCircular"


def test_torus_report():
    code, out, _ = run("torus", "--T", "62.8319", "--n", "1", "--k", "2")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["h"] == pytest.approx(0.885752, abs=1e-6)
    assert doc["k_star"] == 2
    assert doc["resonance_vector"] == pytest.approx([1, 1], abs=1e-4)
    assert doc["det_hessian"] > 0


@pytest.mark.parametrize("argv,needle", [
    (("--T", "6.0", "--n", "1", "--k", "2"), "T > T*_n"),
    (("--T", "62.8319", "--n", "2", "--k", "4"), "gcd(n, k) = 1"),
    (("--T", T20, "--n", "1", "--k", "1"), "k >= k*_{T,n}"),
])
def test_torus_gates(argv, needle):
    code, _, err = run("torus", *argv)
    assert code == EXIT_DOMAIN and needle in err


def test_actions_report():
    code, out, _ = run("actions", "--h", "0.7", "--L", "1.2")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["K0"] == pytest.approx(0.7, rel=1e-10)
    assert doc["grad_K0"] == pytest.approx([0.364213, 0.294673], abs=1e-6)


def test_actions_regime_error():
    code, _, err = run("actions", "--h", "1.5", "--L", "2")
    assert code == EXIT_DOMAIN and "h < m c^2" in err


def test_orbit_commensurable_rho_curve(tmp_path):
    code, out, _ = run("orbit", "--h", "0.7", "--n", "1", "--k", "2", "--out", str(tmp_path))
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["sup_gap"] < 1e-5
    rows = list(csv.DictReader((tmp_path / "rho.csv").open()))
    for row in rows[::37]:
        th = float(row["theta"])
        expect = 1 / (1.69706 * math.cos(th / 2) + 2.1)
        assert float(row["rho"]) == pytest.approx(expect, abs=1e-4)
    assert (tmp_path / "trajectory.csv").exists()
    assert json.loads((tmp_path / "orbit.json").read_text())["sup_gap"] == doc["sup_gap"]


def test_orbit_circular(tmp_path):
    L = str(math.sqrt(1 / (1 - 0.49)))
    code, _, _ = run("orbit", "--h", "0.7", "--L", L, "--out", str(tmp_path))
    assert code == EXIT_OK
    rho = [float(r["rho"]) for r in csv.DictReader((tmp_path / "rho.csv").open())]
    assert max(rho) - min(rho) < 1e-8


def test_orbit_outside_regime(tmp_path):
    code, _, _ = run("orbit", "--h", "1.5", "--L", "2", "--out", str(tmp_path))
    assert code == EXIT_DOMAIN


def test_find_periodic_degenerate(tmp_path):
    code, out, _ = run("find-periodic", "--T", T20, "--n", "1", "--k", "2", "--eps", "0",
                       "--n-omega", "2", "--n-tau", "2", "--out", str(tmp_path))
    doc = json.loads(out)
    assert code == EXIT_OK
    assert len(doc["solutions"]) == 4
    assert doc["note"] == "degenerate (unperturbed continuum)"
    assert sorted(p.name for p in tmp_path.iterdir()) == [
        "result.json", *[f"solution_{i:03d}.csv" for i in range(4)]]


def test_find_periodic_gate(tmp_path):
    code, _, err = run("find-periodic", "--T", T20, "--n", "1", "--k", "1", "--eps", "1e-3",
                       "--out", str(tmp_path))
    assert code == EXIT_DOMAIN and "k >= k*_{T,n}" in err


def test_find_periodic_empty_search(tmp_path):
    # one seed and a large perturbation: the search runs but certifies nothing
    code, out, err = run("find-periodic", "--T", T20, "--n", "1", "--k", "2", "--eps", "5",
                         "--n-omega", "1", "--n-tau", "1", "--out", str(tmp_path))
    assert code == EXIT_EMPTY
    assert json.loads(out)["solutions"] == []
    assert "found no periodic solution" in err


def test_config_file_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"params": {"m": 1.0, "c": 1.0, "alpha": 1.0}}))
    code, out, _ = run("classify", "--h", "0.7", "--L", "1.2", "--config", str(cfg))
    assert code == EXIT_OK
    # a flag overrides the file
    code, out2, _ = run("classify", "--h", "0.7", "--L", "1.2", "--config", str(cfg),
                        "--alpha", "0.5")
    assert json.loads(out2)["r_star"] != json.loads(out)["r_star"]


def test_sweep_empty_grid(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"cells": []}))
    code, _, _ = run("sweep", str(spec), "--out", str(tmp_path))
    assert code == EXIT_OK
    assert (tmp_path / "sweep.csv").read_text() == ",".join(SWEEP_COLUMNS) + "\n"


def test_sweep_single_cell_matches_find_periodic(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"T": 20 * math.pi, "n_omega": 2, "n_tau": 4,
                                "cells": [{"n": 1, "k": 2, "sign": 1, "eps": 1e-3},
                                          {"n": 1, "k": 1, "sign": 1, "eps": 1e-3}]}))
    code, _, _ = run("sweep", str(spec), "--out", str(tmp_path))
    assert code == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert len(rows) == 2
    assert rows[1]["status"].startswith("error")
    single = tmp_path / "single"
    single.mkdir()
    run("find-periodic", "--T", T20, "--n", "1", "--k", "2", "--eps", "1e-3",
        "--n-omega", "2", "--n-tau", "4", "--out", str(single))
    sols = json.loads((single / "result.json").read_text())["solutions"]
    assert int(rows[0]["found"]) == len(sols)
    assert sols
    assert float(rows[0]["min_residual"]) == min(s["residual"] for s in sols)
    assert float(rows[0]["max_closeness"]) == max(s["closeness"] for s in sols)


def test_export_is_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        d.mkdir()
        run("find-periodic", "--T", T20, "--n", "1", "--k", "2", "--eps", "1e-3",
            "--n-omega", "2", "--n-tau", "4", "--out", str(d))
        outs.append({p.name: p.read_bytes() for p in d.iterdir()})
    assert len(outs[0]) == 3 and outs[0] == outs[1]


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    text = capsys.readouterr().out
    for cmd in ("classify", "torus", "orbit", "actions", "find-periodic", "sweep"):
        assert cmd in text


def test_sweep_closeness_grows_with_eps(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"T": 20 * math.pi, "n_omega": 2, "n_tau": 4,
                                "grid": {"n": [1], "k": [2], "sign": [1], "eps": [1e-4, 1e-3]}}))
    assert run("sweep", str(spec), "--out", str(tmp_path))[0] == EXIT_OK
    rows = list(csv.DictReader((tmp_path / "sweep.csv").open()))
    assert [r["status"] for r in rows] == ["ok", "ok"]
    assert float(rows[0]["max_closeness"]) < float(rows[1]["max_closeness"])
