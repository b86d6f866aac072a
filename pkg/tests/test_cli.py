import json

import pytest

from thermoplate import cli
from thermoplate.acceptance import CriterionResult
from thermoplate.errors import ConfigInvalid

SMALL = {"domain": {"modes": 8}, "time": {"t_end": 0.25, "n_steps": 20, "save_every": 10}}


def write(tmp_path, obj, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj, indent=1))
    return str(path)


def run(tmp_path, *args):
    return cli.main([*args, "--quiet"])


def test_default_config_validates():
    cfg = cli.load_config()
    assert cfg["nonlinear"]["a"] == 1.0 and cfg["rng"]["seed"] == 0
    assert cli.load_config(seed=7)["rng"]["seed"] == 7


def test_partial_config_overrides_defaults(tmp_path):
    cfg = cli.load_config(write(tmp_path, {"time": {"n_steps": 5}}))
    assert cfg["time"]["n_steps"] == 5 and cfg["time"]["t_end"] == 1.0


def test_invalid_config_reports_field_and_line(tmp_path):
    path = write(tmp_path, {"nonlinear": {"a": -1.0}})
    with pytest.raises(ConfigInvalid) as info:
        cli.load_config(path)
    msg = str(info.value)
    assert "nonlinear.a" in msg and "line 3" in msg
    with pytest.raises(ConfigInvalid):
        cli.load_config(write(tmp_path, {"domain": {"shape": 3}}))
    with pytest.raises(ConfigInvalid):
        cli.load_config(seed=-1)


def test_exit_codes_for_bad_input(tmp_path, capsys):
    assert run(tmp_path, "solve-linear", "--config", str(tmp_path / "nope.json")) == 1
    assert "cannot read config file" in capsys.readouterr().err
    assert run(tmp_path, "solve-nonlinear", "--config", write(tmp_path, {"nonlinear": {"a": -2}})) == 1
    assert "ConfigInvalid" not in capsys.readouterr().err  # plain diagnostic, no traceback
    (tmp_path / "broken.json").write_text('{"time": {\n  "n_steps": 3,\n}}')
    assert run(tmp_path, "solve-linear", "--config", str(tmp_path / "broken.json")) == 1
    assert "broken.json:3:" in capsys.readouterr().err
    with pytest.raises(SystemExit):
        cli.main(["no-such-command"])


def test_solve_linear_outputs_are_reproducible(tmp_path):
    cfg = write(tmp_path, {**SMALL, "data": {"forcing": 0.5}})
    for name in ("a", "b"):
        assert run(tmp_path, "solve-linear", "--config", cfg, "--out", str(tmp_path / name), "--seed", "4") == 0
    for f in ("trajectory.csv", "solve_report.json", "energy.csv", "residual.csv"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
    assert run(tmp_path, "solve-linear", "--config", cfg, "--out", str(tmp_path / "c"), "--seed", "5") == 0
    assert (tmp_path / "a" / "trajectory.csv").read_bytes() != (tmp_path / "c" / "trajectory.csv").read_bytes()
    report = json.loads((tmp_path / "a" / "solve_report.json").read_text())
    assert report["max_reg_ratio"] > 0 and len(report["times"]) == 21
    lines = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "t,component,k0,k1,value"
    assert len(lines) == 1 + 3 * 3 * 64  # nodes 0, 10, 20


def test_solve_nonlinear_writes_trace(tmp_path):
    out = tmp_path / "o"
    assert run(tmp_path, "solve-nonlinear", "--config", write(tmp_path, SMALL), "--out", str(out)) == 0
    trace = json.loads((out / "picard_trace.json").read_text())
    assert trace["converged"] and trace["shrinks"] == 0
    assert {p.name for p in out.iterdir()} == {"picard_trace.json", "trajectory.csv", "solve_report.json",
                                               "energy.csv", "residual.csv"}


def test_solve_nonlinear_failure_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, {**SMALL, "data": {"amplitude": 300.0, "decay": 0.5},
                           "nonlinear": {"max_picard_iters": 10}})
    out = tmp_path / "o"
    assert run(tmp_path, "solve-nonlinear", "--config", cfg, "--out", str(out)) == 2
    assert "[nonlinear]" in capsys.readouterr().err
    assert json.loads((out / "picard_trace.json").read_text())["shrinks"] >= 1


def test_symbol_report(tmp_path):
    assert run(tmp_path, "symbol-report", "--out", str(tmp_path)) == 0
    rep = json.loads((tmp_path / "sector_report.json").read_text())
    assert 1.40 < rep["spectral_angle"] < 1.41
    assert len(rep["resolvent_sweep"]["rows"]) == rep["n_lambda"] * rep["n_zeta"]


def test_multiplier_check_small(tmp_path):
    cfg = write(tmp_path, {"sweep": {"n_xi": 4, "k_max": 4, "n_radii": 3, "n_angles": 3,
                                     "rbound_N": 8, "rbound_draws": 200, "rbound_configs": 2,
                                     "kahane_trials": 20}})
    code = run(tmp_path, "multiplier-check", "--config", cfg, "--out", str(tmp_path))
    assert code in (0, 2)
    rows = (tmp_path / "michlin_sweep.csv").read_text().splitlines()
    assert rows[0].startswith("family,gamma,level,sup")
    assert len(rows) == 1 + (6 + 1) * 4 * 2
    rb = json.loads((tmp_path / "rbound.json").read_text())
    assert rb["seed"] == 0 and rb["single_operator"]["exact"] and rb["prefix_monotone"]
    assert rb["kahane"]["holds"]


def test_threads_flag_sets_environment(monkeypatch):
    for var in cli._THREAD_VARS:
        monkeypatch.delenv(var, raising=False)
    monkeypatch.setenv("THERMOPLATE_THREADS", "3")
    cli._set_threads(None)
    assert all(__import__("os").environ[v] == "3" for v in cli._THREAD_VARS)
    cli._set_threads(2)
    assert __import__("os").environ["OMP_NUM_THREADS"] == "2"


def test_verify_plumbing(tmp_path, monkeypatch, capsys):
    import thermoplate.acceptance as acc

    def fake_suite(seed, numbers=None, progress=None):
        res = [CriterionResult(1, "one", True, {"x": 0.5}, 1.0), CriterionResult(2, "two", seed == 0, {}, 1.0)]
        for r in res:
            if progress:
                progress(r)
        return res

    monkeypatch.setattr(acc, "run_suite", fake_suite)
    assert cli.main(["verify", "--out", str(tmp_path), "--quiet"]) == 0
    data = json.loads((tmp_path / "acceptance.json").read_text())
    assert [c["number"] for c in data["criteria"]] == [1, 2, 16]
    assert data["criteria"][-1]["passed"]
    assert "3/3 criteria passed" in capsys.readouterr().out
    assert cli.main(["verify", "--out", str(tmp_path), "--quiet", "--seed", "1"]) == 2
