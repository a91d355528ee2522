import json

import numpy as np
import pytest

from nlconsensus import cli, graphs
from nlconsensus.config import ScenarioConfig, parse_initial_condition
from nlconsensus.errors import ConfigParseError


def run(tmp_path, *args):
    return cli.run([*args, "--out", str(tmp_path)])


def test_config_roundtrip():
    cfg = ScenarioConfig.from_dict({"graph": "karate", "seed": 2**63, "k": 1.2,
                                    "initial_condition": {"kind": "fsm", "c": 0.3},
                                    "integration": {"t_end": 50}})
    assert ScenarioConfig.from_json(cfg.to_json()) == cfg
    assert ScenarioConfig.from_json(ScenarioConfig().to_json()) == ScenarioConfig()


@pytest.mark.parametrize("data", [
    {"grpah": "line:5"},
    {"integration": {"dt": 0.01, "method": "euler"}},
    {"seed": -1},
    {"seed": 1.5},
    {"integration": {"dt": 0}},
    {"initial_condition": {"kind": "explicit"}},
    {"k": "big"},
])
def test_config_rejects(data):
    with pytest.raises(ConfigParseError):
        ScenarioConfig.from_dict(data)


def test_initial_condition_parsing():
    assert parse_initial_condition("fsm:0.25").c == 0.25
    assert parse_initial_condition("0.1,0.2").values == [0.1, 0.2]
    with pytest.raises(ConfigParseError):
        parse_initial_condition("fsm:x")
    cfg = ScenarioConfig(seed=5)
    g = graphs.builtin("ring", 6)
    assert np.array_equal(cfg.initial_state(g), ScenarioConfig(seed=5).initial_state(g))
    assert not np.array_equal(cfg.initial_state(g), ScenarioConfig(seed=6).initial_state(g))


def test_threshold_command(tmp_path, capsys):
    assert run(tmp_path, "threshold", "--graph", "line:5", "--signal", "clip:K=1.2") == 0
    out = json.loads((tmp_path / "threshold.json").read_text())
    assert out["k_lambda"] == pytest.approx(0.8485, abs=1e-4) and out["sharp_threshold_met"]
    assert json.loads(capsys.readouterr().out) == out


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": "ring:6", "signal": "tanh:K=2.0", "integration": {"t_end": 3}}))
    assert run(tmp_path / "o", "simulate", "--config", str(cfg), "--t-end", "1", "--x0", "fsm:0.2") == 0
    meta = json.loads((tmp_path / "o" / "trajectory.meta.json").read_text())
    assert meta["config"]["graph"] == "ring:6"
    assert meta["config"]["integration"]["t_end"] == 1.0
    assert meta["version"]
    lines = (tmp_path / "o" / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,x_0,x_1,x_2,x_3,x_4,x_5,residual,disagreement" and len(lines) == 12


def test_exit_codes(tmp_path):
    assert run(tmp_path, "simulate", "--signal", "nope") == 2
    assert run(tmp_path, "simulate", "--graph", "ring:2") == 2
    assert run(tmp_path, "iss", "--graph", "line:5") == 2  # no partition
    with pytest.raises(SystemExit) as info:
        cli.run(["bogus"])
    assert info.value.code == 2


def test_failed_run_leaves_nothing_behind(tmp_path):
    part = tmp_path / "p.txt"
    part.write_text("0 0\n1 1\n2 0\n3 1\n4 0\n")  # {0, 2, 4} is not connected on the path
    out = tmp_path / "o"
    assert cli.run(["iss", "--graph", "line:5", "--partition", str(part), "--t-end", "1",
                    "--out", str(out)]) == 2
    assert not out.exists()


def test_numerical_failure_code(tmp_path, monkeypatch):
    from nlconsensus.errors import NonFiniteState

    def boom(*a, **k):
        raise NonFiniteState("diverged")
    monkeypatch.setattr(cli, "integrate", boom)
    assert run(tmp_path, "simulate") == 3


def test_invariant_failure_code(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, "tail_within_ultimate", lambda a, t: False)
    assert run(tmp_path, "iss", "--graph", "line:5", "--partition", str(_line_partition(tmp_path)),
               "--t-end", "1") == 4


def _line_partition(tmp_path):
    p = tmp_path / "lp.txt"
    p.write_text("0 0\n1 0\n2 1\n3 1\n4 1\n")
    return p


def test_equilibria_and_spectrum(tmp_path):
    assert run(tmp_path, "equilibria", "--graph", "line:5", "--signal", "tanh:K=3") == 0
    eqs = json.loads((tmp_path / "equilibria.json").read_text())
    assert sorted(e["kind"] for e in eqs) == ["FSE"] * 3 + ["NFSE"] * 2
    assert run(tmp_path, "spectrum", "--graph", "karate") == 0
    assert json.loads((tmp_path / "spectrum.json").read_text())["lambda_second"] == pytest.approx(0.8677, abs=1e-4)


def test_bifurcate_command(tmp_path):
    assert run(tmp_path, "bifurcate", "--graph", "line:5", "--signal", "tanh", "--k-min", "0.5",
               "--k-max", "3.5") == 0
    summary = json.loads((tmp_path / "bifurcation_summary.json").read_text())
    assert summary["detected_k_bif"] == pytest.approx(1.4142, abs=1e-3)
    assert summary["detected_k_stab"] == pytest.approx(2.463, abs=0.01)
    assert (tmp_path / "bifurcation.meta.json").exists()


def test_scenarios_are_deterministic(tmp_path):
    for d in ("a", "b"):
        assert run(tmp_path / d, "scenario", "karate-fig5", "--seed", "7", "--t-end", "20") == 0
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert {"trajectory.csv", "iss_cluster_0.csv", "iss_cluster_1.csv", "equilibrium.json"} <= set(names)
    for name in names:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_topology_scenario(tmp_path):
    assert run(tmp_path, "scenario", "topology-fig4", "--seed", "1", "--t-end", "50") == 0
    panels = json.loads((tmp_path / "topology_fig4.json").read_text())
    assert len(panels) == 10
    assert all(p["kind"] in ("FSE", None) for p in panels if p["panel"] == "top")
