import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from nonlocal_isaacs import ConfigurationError, RunConfig
from nonlocal_isaacs.checks import negate_one_weight
from nonlocal_isaacs.cli import cmd_check, main

DECAY = {"problem": {"name": "pure_decay"}, "grid": {"dx": 0.25, "box_radius": 2.0, "steps": 10},
         "scheme": {"theta": 0.0, "vartheta": 0.0}}
STATIONARY = {"problem": {"name": "stationary"}, "grid": {"dx": 0.25, "box_radius": 2.0, "steps": 4}}
CHECK = {"problem": {"name": "fractional_linear", "overrides": {"sigma": 0.5}},
         "grid": {"dx": 0.125, "box_radius": 4.0, "steps": 8},
         "checks": {"pairs": 5, "partition_samples": 10000, "stencil_samples": 20}}


def write(tmp_path, data, name="run.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return path


def run(tmp_path, command, data, *extra):
    cfg = write(tmp_path, data)
    out = tmp_path / "out"
    return main([command, "--config", str(cfg), "--out", str(out), *extra]), out


class TestConfig:
    def test_round_trip(self):
        cfg = RunConfig.from_dict(CHECK)
        again = RunConfig.from_dict(yaml.safe_load(cfg.dump()))
        assert again == cfg and again.dump() == cfg.dump()

    @settings(max_examples=20, deadline=None)
    @given(dx=st.sampled_from([0.5, 0.25, 0.125]), steps=st.integers(1, 50), seed=st.integers(0, 10**6),
           theta=st.sampled_from([0.0, 0.5, 1.0]))
    def test_round_trip_property(self, dx, steps, seed, theta):
        data = {"problem": {"name": "fractional_linear", "overrides": {"sigma": 1.5}},
                "grid": {"dx": dx, "box_radius": 2.0, "steps": steps},
                "scheme": {"theta": theta}, "seed": seed}
        cfg = RunConfig.from_dict(data)
        assert RunConfig.from_dict(yaml.safe_load(cfg.dump())) == cfg

    @pytest.mark.parametrize("bad", [
        {**DECAY, "colour": 1},
        {**DECAY, "grid": {"dx": 0.25, "box_radius": 2.0}},
        {**DECAY, "problem": {"name": "nonsense"}},
        {**DECAY, "scheme": {"theta": 2.0}},
        {**DECAY, "study": {"levels": 2}},
        {"grid": DECAY["grid"]},
    ])
    def test_invalid_configs(self, bad):
        with pytest.raises(ConfigurationError):
            RunConfig.from_dict(bad)


class TestSolve:
    def test_pure_decay(self, tmp_path):
        code, out = run(tmp_path, "solve", DECAY)
        assert code == 0
        data = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)
        final = data[np.isclose(data[:, 0], 1.0), -1]
        assert np.allclose(final, 0.9**10, atol=1e-12)
        summary = dict(line.split(",") for line in (out / "summary.csv").read_text().splitlines())
        assert summary["stability_ok"] == "true"

    def test_stationary(self, tmp_path):
        code, out = run(tmp_path, "solve", STATIONARY)
        assert code == 0
        data = np.loadtxt(out / "solution.csv", delimiter=",", skiprows=1)
        assert np.array_equal(data[data[:, 0] == 0, -1], data[np.isclose(data[:, 0], 1.0), -1])

    def test_cfl_violation(self, tmp_path, capsys):
        cfg = {"problem": {"name": "linear_advection", "overrides": {"horizon": 0.2}},
               "grid": {"dx": 0.1, "box_radius": 1.0, "steps": 1}, "scheme": {"theta": 0.0, "vartheta": 0.0}}
        code, out = run(tmp_path, "solve", cfg)
        assert code == 2
        assert "dt <= 0.1" in capsys.readouterr().err
        assert not out.exists()

    def test_config_error_writes_nothing(self, tmp_path):
        code, out = run(tmp_path, "solve", {**DECAY, "grid": {"dx": -1, "steps": 3}})
        assert code == 2 and not out.exists()

    def test_missing_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.yaml")]) == 2

    def test_solver_failure(self, tmp_path):
        cfg = {"problem": {"name": "two_player_nonconvex", "overrides": {"horizon": 0.25}},
               "grid": {"dx": 0.25, "box_radius": 2.0, "steps": 2},
               "scheme": {"fixed_point_max_iter": 1, "fixed_point_tol": 1e-14}}
        code, out = run(tmp_path, "solve", cfg)
        assert code == 3 and not out.exists()


class TestCheck:
    def test_canonical_passes(self, tmp_path):
        code, out = run(tmp_path, "check", CHECK, "--seed", "3")
        assert code == 0
        text = (out / "check_report.csv").read_text()
        for suite in ("comparison", "stability", "time_regularity", "tent_partition", "kappa_partition",
                      "coefficient_nonnegativity"):
            assert suite in text

    def test_negated_weight_fails(self):
        status, files = cmd_check(RunConfig.from_dict(CHECK), stencil_hook=negate_one_weight)
        assert status == 4
        assert "coefficient_nonnegativity,false" in files["check_report.csv"]


class TestRates:
    def test_degenerate_stationary(self, tmp_path):
        code, out = run(tmp_path, "rates", STATIONARY)
        assert code == 0
        assert "degenerate,true" in (out / "rates.csv").read_text()

    def test_level_count_flag_is_validated(self, tmp_path):
        code, _ = run(tmp_path, "rates", STATIONARY, "--level-count", "2")
        assert code == 2

    def test_threads_do_not_change_bytes(self, tmp_path):
        cfg = {"problem": {"name": "two_player_nonconvex", "overrides": {"sigma": 1.5, "horizon": 0.25}},
               "grid": {"dx": 0.25, "box_radius": 2.0, "steps": 2}}
        path = write(tmp_path, cfg)
        outs = []
        for threads in ("1", "8"):
            out = tmp_path / f"t{threads}"
            assert main(["solve", "--config", str(path), "--out", str(out), "--threads", threads]) == 0
            outs.append((out / "solution.csv").read_bytes())
        assert outs[0] == outs[1]
