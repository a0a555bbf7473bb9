import hashlib
import json

import pytest

from osptrade import cli
from osptrade.core import s2_scenario, serialize_scenario
from osptrade.lp import NumericalFailure
from osptrade.mechanisms import build_two_price_binary, canonical_protocol, dump_protocol
from oracles import two_ray_s2_cost


@pytest.fixture
def files(tmp_path):
    s = s2_scenario()
    paths = {
        "s2": tmp_path / "s2.json",
        "two_ray": tmp_path / "two_ray.json",
        "bad_menu": tmp_path / "bad_menu.json",
    }
    paths["s2"].write_text(serialize_scenario(s))
    paths["two_ray"].write_text(dump_protocol(canonical_protocol(s)))
    paths["bad_menu"].write_text(dump_protocol(build_two_price_binary(s, 2.0, 1.0)[0]))
    return paths


def run(*args):
    return cli.main([str(a) for a in args])


def test_check(files, tmp_path):
    out = tmp_path / "o"
    assert run("check", files["s2"], "--out", out) == 0
    rep = json.loads((out / "check.json").read_text())
    assert rep["conditions"]["condition_i"] and rep["bilateral"]["gain"] < 0
    assert rep["corollary1_deviation"] == 0.0
    man = json.loads((out / "manifest.json").read_text())
    assert man["scenario_sha256"] == hashlib.sha256(files["s2"].read_bytes()).hexdigest()
    assert man["subcommand"] == "check" and man["seed"] == 0


def test_simulate(files, tmp_path):
    out = tmp_path / "o"
    assert run("simulate", files["s2"], "--protocol", files["two_ray"], "--samples", 100000,
               "--seed", 7, "--workers", 1, "--out", out) == 0
    rep = json.loads((out / "simulate.json").read_text())
    assert rep["mean_cost"] == pytest.approx(two_ray_s2_cost(), abs=0.02)
    header = (out / "simulate.csv").read_text().splitlines()[0]
    assert header == "seed,samples,mean_cost,stderr,sq_cost,trade_freq_0,trade_freq_1"


def test_verify_bad_menu(files, tmp_path):
    out = tmp_path / "o"
    assert run("verify-osp", files["bad_menu"], "--out", out) == 0
    rep = json.loads((out / "verify_osp.json").read_text())
    assert rep["verdict"] is False
    assert rep["structural"]["details"]["violating_pair"] == [1, 2]


def test_verify_with_bruteforce(files, tmp_path):
    out = tmp_path / "o"
    assert run("verify-osp", files["two_ray"], "--scenario", files["s2"], "--out", out) == 0
    rep = json.loads((out / "verify_osp.json").read_text())
    assert rep["verdict"] and rep["bruteforce"]["verdict"]


def test_bic_and_bilateral(files, tmp_path):
    out = tmp_path / "o"
    assert run("bic", files["s2"], "--grid", "corners", "--out", out) == 0
    rep = json.loads((out / "bic.json").read_text())
    assert rep["bic_value"] == pytest.approx(4.708333333) and rep["choice_improves"]
    assert (out / "bic_table.csv").exists()
    assert run("bilateral", files["s2"], "--pair", 0, 1, "--samples", 10000, "--out", out) == 0
    rep = json.loads((out / "bilateral.json").read_text())
    assert rep["verification"]["improving"]


def test_replica_csv_only(files, tmp_path, capsys):
    out = tmp_path / "o"
    assert run("replica", files["s2"], "--N-list", "1,5", "--seeds", 2, "--out", out, "--csv-only") == 0
    text = capsys.readouterr().out
    assert text.splitlines()[0] == "N,seed,v_full,v_restricted,rho_dev" and len(text.splitlines()) == 5
    assert not (out / "replica.json").exists()


def test_lm_solve_small(files, tmp_path):
    out = tmp_path / "o"
    assert run("lm-solve", files["s2"], "--iterations", 15, "--restarts", 8, "--out", out) == 0
    rep = json.loads((out / "lm_solve.json").read_text())
    assert set(rep) >= {"lambda", "dual_value", "primal_value", "gap", "per_agent_menus"}
    assert rep["primal_value"] >= rep["dual_value"] - 1e-6


def test_exit_codes_invalid(files, tmp_path, capsys):
    assert run("check", tmp_path / "missing.json") == 2
    bad = tmp_path / "bad.json"
    bad.write_text('{"tasks": [')
    assert run("check", bad) == 2
    with pytest.raises(SystemExit) as exc:
        run("simulate", files["s2"], "--bogus")
    assert exc.value.code == 2
    assert run("simulate", files["s2"], "--protocol", files["s2"], "--out", tmp_path / "o") == 2
    err = capsys.readouterr().err
    assert "missing.json" in err


def test_exit_code_solver_failure(files, tmp_path, monkeypatch):
    def broken(*a, **k):
        raise NumericalFailure("forced")
    monkeypatch.setattr(cli, "solve_dual", broken)
    assert run("lm-solve", files["s2"], "--out", tmp_path / "o") == 3
