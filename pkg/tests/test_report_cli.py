import json
import math

import numpy as np
import pytest
from conftest import scenario_report

from uniqlab.cli import main
from uniqlab.config import parse_config
from uniqlab.errors import UnknownScenario
from uniqlab.report import SCHEMA_VERSION, UniquenessReport, boundary_divergence, certify, decide, emit
from uniqlab.scenarios import SCENARIOS, scenario_config

GOLDEN = "L1(H): CERTIFIED (Thm 1.1)"


def test_alpha2_certified():
    rep = scenario_report("interval-alpha2")
    H = rep.hypotheses
    assert H["capacity"].verdict == "zero"
    assert H["condition_CA"].verdict == "satisfied"
    assert H["mass_gap"].verdict == "vanishing"
    assert H["balls_bounded"].status == "certified"
    assert H["tacklind"].verdict == "satisfied"
    assert rep.conclusions["l1_uniqueness_H"].status == "certified"
    assert GOLDEN in emit(rep, "text").splitlines()


def test_euclidean_square_refuted_with_fourier_gap():
    from oracles import dirichlet_gap_square

    rep = scenario_report("euclidean-square")
    assert rep.hypotheses["capacity"].verdict == "positive"
    assert rep.conclusions["markov_uniqueness"].status == "refuted"
    assert rep.conclusions["l1_uniqueness_H"].status in ("refuted", "inconclusive")
    gaps = rep.hypotheses["mass_gap"].evidence["gap"]
    assert rep.hypotheses["mass_gap"].verdict == "stable"
    assert gaps[-1] == pytest.approx(dirichlet_gap_square(0.1), rel=0.01)


def test_alpha0_capacity_per_end():
    rep = scenario_report("interval-alpha0")
    assert rep.conclusions["markov_uniqueness"].status == "refuted"
    comps = rep.hypotheses["capacity"].evidence["components"]
    assert len(comps) == 2
    for c in comps:
        assert c["value"] == pytest.approx(math.tanh(1), rel=0.02)


def test_fast_metric_line_blocked():
    rep = scenario_report("fast-metric-line")
    assert rep.hypotheses["balls_bounded"].verdict == "suspect-unbounded"
    assert rep.conclusions["l1_uniqueness_H"].status != "certified"
    assert rep.conclusions["markov_uniqueness"].status != "certified"


def test_drift_demo_k_certified():
    rep = scenario_report("drift-K-demo")
    lo = rep.hypotheses["lower_order"].evidence
    assert all(lo["conditions"].values())
    assert lo["omega1"] == pytest.approx(1.0, abs=0.01)  # div c = 1 - 2x, largest near x = 0
    assert rep.conclusions["l1_uniqueness_K"].status == "certified"
    assert rep.checks["quasi_contractivity"]["passed"]


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_no_witness_disagreement(name):
    rep = scenario_report(name)
    assert not rep.flags["witness_disagreement"]
    cap, ca = rep.hypotheses["capacity"].verdict, rep.hypotheses["condition_CA"].verdict
    assert (cap == "zero") == (ca == "satisfied")


@pytest.mark.parametrize("name", list(SCENARIOS))
def test_conclusion_logic_invariants(name):
    rep = scenario_report(name)
    H, C = rep.hypotheses, rep.conclusions
    if C["l1_uniqueness_H"].status == "certified":
        assert all(H[n].status == "certified" for n in ("balls_bounded", "tacklind", "markov_unique"))
    if C["markov_uniqueness"].status == "certified":
        assert H["capacity"].verdict == "zero" and H["condition_CA"].verdict == "satisfied"
        assert H["mass_gap"].verdict == "vanishing"
    if C["markov_uniqueness"].status == "refuted":
        assert H["capacity"].verdict == "positive" or H["mass_gap"].verdict == "stable"
    for con in C.values():
        assert set(con.consumes) <= set(H)
    # growth failure never refutes by itself
    if H["tacklind"].status == "refuted" and C["markov_uniqueness"].status != "refuted":
        assert C["l1_uniqueness_H"].status == "inconclusive"


def test_json_round_trip():
    rep = scenario_report("interval-alpha1")
    doc = json.loads(emit(rep, "json"))
    assert doc["schema"] == SCHEMA_VERSION
    again = UniquenessReport.from_dict(doc)
    assert json.loads(emit(again, "json")) == doc


def test_empty_report_is_inconclusive():
    rep = UniquenessReport("empty")
    decide(rep, True)
    doc = json.loads(emit(rep, "json"))
    assert all(c["status"] == "inconclusive" for c in doc["conclusions"].values())
    assert all(h["status"] == "inconclusive" for h in doc["hypotheses"].values())


def test_window_with_few_radii_is_inconclusive():
    cfg = parse_config("""
[domain]
dim = 1
lower = -10
upper = 10
truncated = x1- x1+
origin = 0

[coefficients]
c11 = (1 + x^2)^2

[grid]
resolutions = 401, 801

[analysis]
n_radii = 10
""", name="few-radii")
    rep = certify(cfg)
    assert rep.hypotheses["tacklind"].status == "inconclusive"
    assert "InsufficientData" in rep.hypotheses["tacklind"].diagnostic
    assert rep.conclusions["l1_uniqueness_H"].status == "inconclusive"
    assert rep.conclusions["l1_uniqueness_K"].status == "inconclusive"


def test_refinement_does_not_flip_certified():
    base = scenario_config("interval-alpha2")
    coarse = certify(parse_config(base.source.replace("251, 501, 1001, 2001", "251, 501, 1001"), "coarse"))
    full = scenario_report("interval-alpha2")
    assert coarse.conclusions["l1_uniqueness_H"].status == "certified"
    assert full.conclusions["l1_uniqueness_H"].status == "certified"


@pytest.mark.parametrize("values, expected", [
    ([1.0, 1.69, 2.38, 3.07], "diverging"),  # log blow-up: constant increments
    ([1.0, 1.4, 1.6, 1.7], "converging"),  # halving increments
    ([1.0, 1.01], "converging"),
    ([1.0, 2.0], "inconclusive"),
    ([1.0, math.inf], "inconclusive"),
])
def test_boundary_divergence(values, expected):
    hs = [2.0**-k for k in range(len(values))]
    assert boundary_divergence(hs, values)[0] == expected


def test_unknown_scenario():
    with pytest.raises(UnknownScenario):
        scenario_config("flat-earth")


def test_cli_scenario_golden(capsys):
    assert main(["scenario", "interval-alpha2"]) == 0
    out = capsys.readouterr().out
    assert GOLDEN in out.splitlines()
    assert "L1(K): CERTIFIED (Thm 1.1)" in out


def test_cli_writes_artifacts(tmp_path, capsys):
    cfg = tmp_path / "a.ini"
    cfg.write_text(scenario_config("interval-alpha0").source.replace("251, 501, 1001, 2001", "101, 201"))
    assert main(["certify", "--config", str(cfg), "--emit", "json", "--out", str(tmp_path / "out")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["conclusions"]["markov_uniqueness"]["status"] == "refuted"
    names = {p.name for p in (tmp_path / "out").iterdir()}
    assert {"report.json", "growth.csv", "capacity.csv", "ca.csv", "trajectory.csv"} <= names


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["scenario", "nowhere"]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[domain]\ndim = 1\n")
    assert main(["certify", "--config", str(bad)]) == 2
    spd = tmp_path / "spd.ini"
    spd.write_text("[domain]\ndim = 1\norigin = 0.5\n[coefficients]\nc11 = x - 0.5\n[grid]\nresolutions = 11, 21\n")
    assert main(["capacity", "--config", str(spd)]) == 2
    capsys.readouterr()


def test_cli_distance_and_volume(tmp_path, capsys):
    out = tmp_path / "rho.csv"
    assert main(["distance", "--scenario", "interval-alpha0", "--resolution", "11", "--out", str(out)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    assert data.shape == (9, 2)
    assert np.allclose(data[:, 1], np.abs(data[:, 0] - 0.5))
    assert main(["volume", "--scenario", "euclidean-square", "--resolution", "65", "--radii", "0.2", "0.1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "r,volume,truncated"
    assert [float(line.split(",")[0]) for line in lines[1:]] == [0.1, 0.2]


def test_cli_capacity_and_evolve(tmp_path, capsys):
    pts = tmp_path / "pts.txt"
    pts.write_text("0.0\n")
    assert main(["capacity", "--scenario", "interval-alpha0", "--resolution", "1001", "--collar", "1",
                 "--target", str(pts)]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["value"] == pytest.approx(math.tanh(1), rel=0.02)
    assert {"value", "trace", "verdict"} <= set(doc)
    csv_path = tmp_path / "traj.csv"
    dump = tmp_path / "snaps"
    assert main(["evolve", "--scenario", "interval-alpha0", "--resolution", "101", "--generator", "hn",
                 "--t", "0.01", "--dt", "0.005", "--out", str(csv_path), "--dump", str(dump)]) == 0
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1)
    assert data.shape == (3, 4)
    assert np.allclose(data[:, 1], data[0, 1])  # Neumann conserves mass
    assert len(list(dump.iterdir())) == 3
