import json
from pathlib import Path

import numpy as np
import pytest

from idinput import cli, config as cfgmod, results
from idinput.core import Trajectory, assemble_data, estimate_theta
from idinput.dmdc import choose_ranks, reduce
from idinput.errors import ConfigError
from idinput.harness import EpochLog, make_random_plant, run_experiment, simulate_plant, Constraints


def minimal_config(tmp_path, **overrides):
    raw = {"plant": {"n": 4, "m": 2}}
    raw.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


def fast_config(tmp_path, **extra):
    raw = {
        "plant": {"n": 2, "m": 1, "sigma": 0.02},
        "constraints": {"du_max": 0.3},
        "methods": ["lp", "random"],
        "horizon": 6,
        "epochs": 1,
        "seeds": 5,
        "dt": 0.1,
    }
    raw.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(raw))
    return path


class TestConfig:
    def test_minimal_with_defaults(self, tmp_path):
        cfg = cfgmod.parse_config(minimal_config(tmp_path))
        assert cfg.constraints.beta == 1.0
        assert cfg.ccp_tol == 1e-4
        assert cfg.dmdc_energy == 0.99
        assert cfg.plant.n == 4
        assert cfg.constraints.du_max == cfgmod.DU_DERIVE

    def test_negative_beta_names_field(self, tmp_path):
        path = minimal_config(tmp_path, constraints={"beta": -1.0})
        with pytest.raises(ConfigError, match="beta"):
            cfgmod.parse_config(path)

    def test_unknown_key_named(self, tmp_path):
        path = minimal_config(tmp_path, horizons=12)
        with pytest.raises(ConfigError, match="horizons"):
            cfgmod.parse_config(path)

    def test_unknown_nested_key_named(self, tmp_path):
        path = minimal_config(tmp_path, plant={"n": 3, "m": 1, "flavor": "x"})
        with pytest.raises(ConfigError, match="flavor"):
            cfgmod.parse_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="not found"):
            cfgmod.parse_config(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError, match="malformed"):
            cfgmod.parse_config(path)

    def test_bad_method_rejected(self, tmp_path):
        path = minimal_config(tmp_path, methods=["sdp", "simplex"])
        with pytest.raises(ConfigError, match="simplex"):
            cfgmod.parse_config(path)

    def test_missing_data_file_rejected(self, tmp_path):
        path = minimal_config(tmp_path, data="nowhere.csv")
        with pytest.raises(ConfigError, match="data file"):
            cfgmod.parse_config(path)

    def test_round_trip(self, tmp_path):
        cfg = cfgmod.parse_config(fast_config(tmp_path, sigma=0.037, ccp_tol=3e-5))
        out = tmp_path / "echo.json"
        cfgmod.save_config(cfg, out)
        again = cfgmod.parse_config(out)
        assert again == cfg


class TestResultFiles:
    def test_trajectory_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        traj = Trajectory(states=rng.normal(size=(9, 3)), inputs=rng.normal(size=(8, 2)), dt=0.1)
        designed = rng.integers(0, 2, 8).astype(bool)
        path = results.write_trajectory(tmp_path / "traj.csv", traj, designed)
        back, designed_back = results.read_trajectory(path)
        assert np.array_equal(back.states, traj.states)
        assert np.array_equal(back.inputs, traj.inputs)
        assert back.dt == traj.dt
        assert np.array_equal(designed_back, designed)

    def test_trajectory_column_count(self, tmp_path):
        traj = Trajectory(states=np.zeros((4, 3)), inputs=np.zeros((3, 2)), dt=0.5)
        path = results.write_trajectory(tmp_path / "t.csv", traj)
        header = path.read_text().splitlines()[0].split(",")
        assert len(header) == 2 + 3 + 2

    def test_empty_logs_header_only(self, tmp_path):
        path = results.write_epoch_logs(tmp_path / "epochs.csv", [])
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("epoch,")

    def test_epoch_logs_exclude_wallclock_by_default(self, tmp_path):
        log = EpochLog(
            epoch=1,
            k=20,
            trace_gamma=0.1,
            rmse_predicted=0.2,
            rmse_true=0.3,
            plan_wallclock=0.123,
            solver_status="optimal",
            constraint_margin_min=0.01,
            ccp_iterations=4,
        )
        default = results.write_epoch_logs(tmp_path / "a.csv", [log]).read_text()
        assert "wallclock" not in default
        timed = results.write_epoch_logs(tmp_path / "b.csv", [log], timings=True).read_text()
        assert "plan_wallclock" in timed

    def test_model_round_trip_full(self, tmp_path):
        rng = np.random.default_rng(1)
        from conftest import excite, stable_system

        A, B = stable_system(rng, 3, 2)
        states, inputs = excite(A, B, rng, k=30, sigma=0.05)
        est = estimate_theta(assemble_data(Trajectory(states, inputs)), sigma=0.05)
        path = results.write_model(tmp_path / "model.json", est)
        model, sigma = results.read_model(path)
        assert sigma == est.sigma
        assert np.array_equal(model.A, est.A)
        assert np.array_equal(model.gamma, est.gamma)

    def test_model_round_trip_reduced(self, tmp_path):
        rng = np.random.default_rng(2)
        from conftest import excite, stable_system

        A, B = stable_system(rng, 4, 1)
        states, inputs = excite(A, B, rng, k=30, sigma=0.05)
        data = assemble_data(Trajectory(states, inputs))
        model = reduce(data, *choose_ranks(data, 0.999))
        path = results.write_model(tmp_path / "model.json", model, sigma=0.05)
        back, sigma = results.read_model(path)
        assert sigma == 0.05
        assert np.array_equal(back.basis, model.basis)
        assert back.p == model.p and back.r == model.r

    def test_unsupported_model_version(self, tmp_path):
        path = tmp_path / "model.json"
        path.write_text(json.dumps({"format_version": 99, "type": "full"}))
        with pytest.raises(ConfigError, match="format_version"):
            results.read_model(path)


class TestCli:
    def run(self, *argv):
        return cli.main([str(a) for a in argv])

    def make_data_file(self, tmp_path, n=3, m=2, k=40, sigma=0.02, seed=0):
        plant = make_random_plant(n, m, sigma=sigma, seed=seed)
        rng = np.random.default_rng(seed + 1)
        traj = simulate_plant(plant, rng.uniform(-1, 1, size=(k, m)), dt=0.1)
        path = tmp_path / "data.csv"
        results.write_trajectory(path, traj)
        return path

    def test_identify(self, tmp_path, capsys):
        data = self.make_data_file(tmp_path)
        out = tmp_path / "out"
        assert self.run("--out", out, "identify", data, "--sigma", 0.02) == 0
        text = capsys.readouterr().out
        assert "trace_gamma" in text and "rmse_predicted" in text
        assert (out / "model.json").is_file()

    def test_identify_dmdc(self, tmp_path, capsys):
        data = self.make_data_file(tmp_path, n=5, m=1)
        out = tmp_path / "out"
        assert self.run("--out", out, "identify", data, "--dmdc", "--energy", 0.999) == 0
        assert "reduced" in capsys.readouterr().out
        model, _ = results.read_model(out / "model.json")
        from idinput.dmdc import ReducedModel

        assert isinstance(model, ReducedModel)

    def test_identify_rank_deficient_exits_3(self, tmp_path):
        # constant states, zero inputs: Z Z^T singular
        traj = Trajectory(states=np.ones((6, 2)), inputs=np.zeros((5, 1)), dt=0.1)
        path = tmp_path / "flat.csv"
        results.write_trajectory(path, traj)
        assert self.run("identify", path, "--sigma", 0.1, "--out", tmp_path / "o") == 3

    def test_plan(self, tmp_path, capsys):
        data = self.make_data_file(tmp_path, n=2, m=1, k=30, seed=3)
        out = tmp_path / "out"
        assert self.run("--out", out, "identify", data, "--sigma", 0.02) == 0
        cfg = fast_config(
            tmp_path,
            plant={"n": 2, "m": 1, "sigma": 0.02},
            methods=["lp"],
            data=str(data),
        )
        assert self.run("--out", out, "plan", out / "model.json", cfg) == 0
        assert (out / "planned_inputs.csv").is_file()
        assert (out / "predicted_states.csv").is_file()
        assert "objective" in capsys.readouterr().out

    def test_plan_infeasible_exits_4(self, tmp_path):
        data = self.make_data_file(tmp_path, n=2, m=1, k=30, seed=4)
        out = tmp_path / "out"
        self.run("--out", out, "identify", data, "--sigma", 0.02)
        cfg = fast_config(
            tmp_path,
            plant={"n": 2, "m": 1, "sigma": 0.02},
            methods=["lp"],
            data=str(data),
            constraints={"du_max": 0.3, "x_lo": -1e-6, "x_hi": 1e-6, "beta": 100.0},
        )
        assert self.run("--out", out, "plan", out / "model.json", cfg) == 4

    def test_plan_requires_data(self, tmp_path):
        data = self.make_data_file(tmp_path, n=2, m=1, seed=5)
        out = tmp_path / "out"
        self.run("--out", out, "identify", data, "--sigma", 0.02)
        cfg = fast_config(tmp_path, plant={"n": 2, "m": 1, "sigma": 0.02}, methods=["lp"])
        assert self.run("--out", out, "plan", out / "model.json", cfg) == 2

    def test_simulate(self, tmp_path, capsys):
        cfg = fast_config(tmp_path)
        out = tmp_path / "out"
        assert self.run("--out", out, "simulate", cfg) == 0
        assert (out / "trajectory_lp.csv").is_file()
        assert (out / "epochs_lp.csv").is_file()
        assert "final trace_gamma" in capsys.readouterr().out

    def test_benchmark(self, tmp_path, capsys):
        cfg = fast_config(tmp_path, seeds=5)
        out = tmp_path / "out"
        assert self.run("--out", out, "benchmark", cfg) == 0
        summary = (out / "benchmark_summary.csv").read_text()
        assert summary.splitlines()[0].startswith("method,")
        assert len(summary.splitlines()) == 3
        assert (out / "epochs_lp_seed0.csv").is_file()

    @pytest.mark.parametrize("method", ["random", "prbs", "multisine"])
    def test_signals(self, tmp_path, capsys, method):
        cfg = fast_config(
            tmp_path,
            plant={"n": 2, "m": 2, "sigma": 0.02},
            horizon=32,
            multisine={"num_components": 2, "rpf_iters": 5},
        )
        out = tmp_path / "out"
        assert self.run("--out", out, "signals", cfg, "--method", method) == 0
        assert (out / f"signal_{method}.csv").is_file()
        scores = (out / f"signal_scores_{method}.csv").read_text()
        assert scores.splitlines()[0] == "method,channel,rpf,degenerate,max_diff"
        assert "rpf" in capsys.readouterr().out or True

    def test_config_error_exit_code(self, tmp_path):
        path = minimal_config(tmp_path, constraints={"beta": -2.0})
        assert self.run("simulate", path) == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg = fast_config(tmp_path)
        a, b = tmp_path / "a", tmp_path / "b"
        self.run("--out", a, "--seed", 1, "simulate", cfg)
        self.run("--out", b, "--seed", 2, "simulate", cfg)
        assert (a / "trajectory_lp.csv").read_text() != (b / "trajectory_lp.csv").read_text()

    def test_byte_identical_reruns(self, tmp_path):
        cfg = fast_config(tmp_path, seeds=5)
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert self.run("--out", out, "benchmark", cfg) == 0
            outs.append(out)
        files1 = sorted(p.name for p in outs[0].iterdir())
        files2 = sorted(p.name for p in outs[1].iterdir())
        assert files1 == files2
        for name in files1:
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
