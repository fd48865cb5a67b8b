import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from swipt_secrecy import cli, harness
from swipt_secrecy.channel import ChannelSet, db_to_linear, generate_channels
from swipt_secrecy.harness import (
    EXPERIMENTS,
    ROW_FIELDS,
    SCHEMES,
    ConfigError,
    ExperimentConfig,
    default_config,
    dumps_config,
    load_config,
    loads_config,
    read_csv,
    rows_to_csv,
    run_experiment,
)

QUICK = dict(trials=2, power_grid_dB=[10.0, 20.0], linesearch_points=10, refine="brent", tau_points=10)


def _strip_time(text):
    rows = read_csv(text)
    for r in rows:
        r.pop("solve_time")
    return rows


def test_minimal_file_gives_defaults(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "fig1-rate-vs-power"\n')
    cfg = load_config(p)
    assert (cfg.n_t, cfg.K, cfg.L, cfg.trials) == (4, 3, 2, 50)
    assert cfg.P_dB == 20.0 and cfg.eps == 0.05
    assert cfg.power_grid_dB == [0, 5, 10, 15, 20, 25, 30]
    assert cfg.scheme_list == ["bisection", "sdr", "robust-bisection", "mismatch-bisection"]


def test_trials_zero_names_field():
    with pytest.raises(ConfigError, match="trials"):
        loads_config('experiment = "fig1-rate-vs-power"\ntrials = 0\n')


@pytest.mark.parametrize(
    "text, key",
    [
        ('experiment = "fig1-rate-vs-power"\nbogus = 1\n', "bogus"),
        ("trials = 3\n", "experiment"),
        ('experiment = "fig9"\n', "experiment"),
        ('experiment = "fig1-rate-vs-power"\neps_grid = []\n', "eps_grid"),
        ('experiment = "fig1-rate-vs-power"\nschemes = ["magic"]\n', "schemes"),
        ('experiment = "custom"\n', "schemes"),
        ('experiment = "fig1-rate-vs-power"\n[solver]\ntol = 1\n', "solver"),
        ('experiment = "fig1-rate-vs-power"\nn_t = 2.5\n', "n_t"),
    ],
)
def test_validation_errors(text, key):
    with pytest.raises(ConfigError, match=key):
        loads_config(text)


def test_parse_error_reports_position():
    with pytest.raises(ConfigError, match=r"line 2, column \d+"):
        loads_config('experiment = "fig1-rate-vs-power"\ntrials = = 3\n')


configs = st.builds(
    ExperimentConfig,
    experiment=st.sampled_from([e for e in EXPERIMENTS if e != "custom"]),
    n_t=st.integers(1, 8),
    K=st.integers(1, 4),
    L=st.integers(1, 4),
    power_grid_dB=st.lists(st.integers(-10, 40), min_size=1, max_size=5),
    eps_grid=st.lists(st.floats(0, 0.5), min_size=1, max_size=4),
    trials=st.integers(1, 100),
    seed=st.integers(0, 2**31),
    refine=st.sampled_from(["grid", "brent"]),
    schemes=st.lists(st.sampled_from(SCHEMES), max_size=3),
)


@given(configs)
def test_config_round_trip(cfg):
    text = dumps_config(cfg)
    again = loads_config(text)
    assert again == cfg
    assert dumps_config(again) == text


def test_db_conversion_fixture():
    assert db_to_linear(20.0) == pytest.approx(100.0)


def test_fixture_run_matches_mrt(monkeypatch):
    fixture = ChannelSet([1.0, 0.0], [[0.0, 1.0]], [[1.0, 0.0]])
    monkeypatch.setattr(harness, "generate_channels", lambda *a: fixture)
    cfg = default_config("fig1-rate-vs-power", n_t=2, K=1, L=1, trials=1, power_grid_dB=[0.0], eta=0.0, schemes=["bisection"])
    (row,) = run_experiment(cfg)
    assert row["status"] == "optimal"
    assert row["rate"] == pytest.approx(np.log2(2.0), abs=1e-3)


def test_row_count_and_csv_shape(tmp_path):
    cfg = default_config("fig1-rate-vs-power", **QUICK)
    rows = run_experiment(cfg, tmp_path)
    assert len(rows) == cfg.trials * len(cfg.sweep_values) * len(cfg.scheme_list)
    text = (tmp_path / "fig1-rate-vs-power.csv").read_bytes()
    assert b"\r\n" not in text
    head = text.decode("utf-8").splitlines()[0]
    assert head.split(",") == list(ROW_FIELDS)
    assert (tmp_path / "fig1-rate-vs-power_summary.csv").exists()
    assert loads_config((tmp_path / "fig1-rate-vs-power.toml").read_text()) == cfg
    assert harness.failure_fraction(rows) == 0.0


def test_csv_deterministic_across_workers(tmp_path):
    cfg = default_config("fig4-an-rate-vs-power", schemes=["ls-an", "sca-noan"], **QUICK)
    run_experiment(cfg, tmp_path / "a")
    run_experiment(cfg, tmp_path / "b", workers=2)
    a = (tmp_path / "a" / "fig4-an-rate-vs-power.csv").read_text()
    b = (tmp_path / "b" / "fig4-an-rate-vs-power.csv").read_text()
    assert _strip_time(a) == _strip_time(b)


def test_failures_are_recorded(monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("solver exploded")

    monkeypatch.setattr(harness.noan, "max_secrecy_rate_bisection", boom)
    cfg = default_config("fig1-rate-vs-power", trials=1, power_grid_dB=[10.0], schemes=["bisection", "sdr"])
    rows = run_experiment(cfg)
    assert [r["status"] for r in rows] == ["numerical-failure", "optimal"]
    assert harness.failure_fraction(rows) == 0.5
    summary = harness.summarize(rows, cfg)
    assert summary[0]["n"] == 1 and summary[0]["n_ok"] == 0


def test_fig5_rows_carry_traces():
    cfg = default_config("fig5-sca-convergence", trials=1, power_grid_dB=[10.0], schemes=["sca-an"])
    (row,) = run_experiment(cfg)
    tr = [float(v) for v in row["trace"].split(";")]
    assert len(tr) == row["iterations"] and np.all(np.diff(tr) <= 1e-9)


def test_csv_quoting_round_trip():
    row = {k: "" for k in ROW_FIELDS}
    row.update(experiment="custom", scheme='odd, "name"', rate=0.1, trace="a;b")
    back = read_csv(rows_to_csv([row]))[0]
    assert back["scheme"] == 'odd, "name"' and float(back["rate"]) == 0.1


def test_solution_file_round_trip(tmp_path):
    from swipt_secrecy.noan import power_min
    from swipt_secrecy.channel import SystemParams

    ch = generate_channels(3, 2, 1, 0)
    sol = power_min(1.0, ch, SystemParams(3, 10.0, E_targets=0.5))
    path = tmp_path / "sol.json"
    harness.save_solution(path, sol, ch, R=1.0, E=0.5)
    w, ch2, R, E = harness.load_solution(path)
    assert np.allclose(w, sol.w) and np.allclose(ch2.h_e, ch.h_e) and R == 1.0 and np.allclose(E, 0.5)


def test_cli_run(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('experiment = "fig2-energy-vs-power"\npower_grid_dB = [10.0]\ntau_points = 10\n')
    assert cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "out"), "--trials", "1", "--seed", "3"]) == 0
    rows = read_csv((tmp_path / "out" / "fig2-energy-vs-power.csv").read_text())
    assert len(rows) == 3 and rows[0]["trial_seed"] == str(harness.derive_seed(3, 0))
    assert "3 rows" in capsys.readouterr().out


def test_cli_run_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.toml"
    cfg.write_text('experiment = "fig1-rate-vs-power"\ntrials = 0\n')
    assert cli.main(["run", "--config", str(cfg)]) == 2
    assert "trials" in capsys.readouterr().err


@pytest.mark.parametrize("kind", ["secrecy-max", "power-min", "energy-max", "an-inner"])
def test_cli_oracle(kind, capsys):
    assert cli.main(["oracle", "--kind", kind, "--seed", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["oracle"] is not None and out["solver"] is not None
    assert out["solver"] == pytest.approx(out["oracle"], rel=0.03, abs=0.02)


def test_cli_certify(tmp_path, capsys):
    from swipt_secrecy.channel import SystemParams, UncertaintyModel
    from swipt_secrecy.noan import power_min, robust_power_min

    ch = generate_channels(4, 3, 2, 1)
    params = SystemParams(4, 10.0, E_targets=0.5)
    rob = robust_power_min(1.0, UncertaintyModel.uniform(ch, 0.1), params)
    harness.save_solution(tmp_path / "rob.json", rob, ch, R=1.0, E=0.5)
    assert cli.main(["certify", "--solution", str(tmp_path / "rob.json"), "--eps", "0.1", "--samples", "200"]) == 0
    nom = power_min(1.0, ch, params)
    harness.save_solution(tmp_path / "nom.json", nom, ch, R=1.0, E=0.5)
    assert cli.main(["certify", "--solution", str(tmp_path / "nom.json"), "--eps", "0.1", "--samples", "200"]) == 1
    capsys.readouterr()


def test_cpu_workers_clamped():
    assert harness.cpu_workers(None) == 1 and harness.cpu_workers(0) == 1
    assert 1 <= harness.cpu_workers(64) <= 64


def test_shipped_configs_load():
    from pathlib import Path

    paths = sorted((Path(__file__).resolve().parents[1] / "scripts" / "configs").glob("*.toml"))
    assert len(paths) >= 7
    for p in paths:
        cfg = load_config(p)
        assert cfg.scheme_list
