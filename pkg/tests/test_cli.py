import csv
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from diffnet.cli import EXIT_CONFIG, EXIT_OK, EXIT_UNSTABLE, PRESETS, main
from diffnet.network import (
    LinkNoiseProfile,
    NetworkModel,
    NodeProfile,
    Topology,
    VarianceRanges,
    WeightTrajectory,
    load_network,
    random_network,
    save_network,
    validate,
)

NOISY_RANGES = VarianceRanges(
    sigma_u2=(0.5, 2.0),
    sigma_v2=(0.01, 0.1),
    sigma_w2=(1e-3, 2e-2),
    sigma_d2=(1e-3, 2e-2),
    sigma_u_link2=(1e-3, 2e-2),
    sigma_psi2=(1e-3, 2e-2),
)


def scalar_network(mu=0.01, sigma_v2=1.0):
    return NetworkModel(
        topology=Topology.from_edges(1, []),
        nodes=NodeProfile(m_dim=1, r_u=np.array([[[1.0]]], dtype=complex),
                          sigma_v2=np.array([sigma_v2]), mu=np.array([mu])),
        link_noise=LinkNoiseProfile.zeros(0, 1),
        weights=WeightTrajectory(mode="constant", w0=np.array([1.0 + 0j])),
    )


def write_scenario(dir_path, network, **fields):
    save_network(network, dir_path / "net.json")
    scen = {"network": "net.json"}
    scen.update(fields)
    path = dir_path / "scenario.json"
    with open(path, "w") as fh:
        json.dump(scen, fh)
    return path


class TestGenScenario:
    @pytest.mark.parametrize("preset", sorted(PRESETS))
    def test_presets_emit_valid_pairs(self, preset, tmp_path):
        out = tmp_path / preset
        assert main(["gen-scenario", "--preset", preset, "--out", str(out)]) == EXIT_OK
        net = load_network(out / "network.json")
        assert validate(net).ok
        assert net.n_nodes == 20
        scen = json.loads((out / "scenario.json").read_text())
        assert scen["network"] == "network.json"
        assert set(scen["rules"]) == {"a1", "c", "a2"}

    def test_generation_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["gen-scenario", "--preset", "noisy_exchange_atc",
                         "--seed", "3", "--out", str(out)]) == EXIT_OK
        assert (a / "network.json").read_bytes() == (b / "network.json").read_bytes()
        assert (a / "scenario.json").read_bytes() == (b / "scenario.json").read_bytes()

    def test_seed_changes_the_network(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        main(["gen-scenario", "--preset", "noisy_exchange_atc", "--seed", "1",
              "--out", str(a)])
        main(["gen-scenario", "--preset", "noisy_exchange_atc", "--seed", "2",
              "--out", str(b)])
        assert (a / "network.json").read_bytes() != (b / "network.json").read_bytes()

    def test_generated_scenario_simulates(self, tmp_path):
        out = tmp_path / "s"
        main(["gen-scenario", "--preset", "noisy_exchange_atc", "--out", str(out)])
        code = main(["simulate", "--config", str(out / "scenario.json"),
                     "--runs", "2", "--iters", "50", "--out", str(out)])
        assert code == EXIT_OK
        assert (out / "curve.csv").exists()


class TestSimulate:
    def test_low_noise_scenario_reaches_deep_floor(self, tmp_path):
        net = scalar_network(mu=0.3, sigma_v2=1e-6)
        cfg = write_scenario(tmp_path, net, runs=2, iterations=400, seed=1,
                             outputs={"curve": "curve.csv"})
        assert main(["simulate", "--config", str(cfg)]) == EXIT_OK
        with open(tmp_path / "curve.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 400
        assert float(rows[-1]["msd_db"]) < -60.0
        assert int(rows[-1]["divergent_runs"]) == 0

    def test_trajectory_output_when_requested(self, tmp_path):
        net = random_network(2, 4, 2, 0.6, NOISY_RANGES)
        net.weights = WeightTrajectory(mode="rotation", w0=net.weights.w0,
                                       omega=2.0 * np.pi / 500.0)
        cfg = write_scenario(tmp_path, net, runs=2, iterations=60,
                             rules={"a1": "identity", "c": "identity",
                                    "a2": "uniform"},
                             outputs={"curve": "c.csv", "trajectory": "t.csv"})
        assert main(["simulate", "--config", str(cfg)]) == EXIT_OK
        with open(tmp_path / "t.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 60
        assert "est_re_1" in rows[0] and "true_im_2" in rows[0]

    def test_zero_iterations_is_config_error(self, tmp_path):
        cfg = write_scenario(tmp_path, scalar_network(), runs=2, iterations=50)
        assert main(["simulate", "--config", str(cfg), "--iters", "0"]) == EXIT_CONFIG

    def test_all_divergent_reports_unstable(self, tmp_path):
        cfg = write_scenario(tmp_path, scalar_network(mu=25.0), runs=2,
                             iterations=200)
        assert main(["simulate", "--config", str(cfg)]) == EXIT_UNSTABLE

    def test_missing_scenario_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "no.json")]) == EXIT_CONFIG

    def test_malformed_scenario_file(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        assert main(["simulate", "--config", str(path)]) == EXIT_CONFIG

    def test_scenario_without_network_entry(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps({"runs": 2}))
        assert main(["simulate", "--config", str(path)]) == EXIT_CONFIG

    def test_unknown_rule_is_config_error(self, tmp_path):
        cfg = write_scenario(tmp_path, scalar_network(), runs=1, iterations=10,
                             rules={"a2": "no_such_rule"})
        assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG

    def test_thread_count_does_not_change_output(self, tmp_path, monkeypatch):
        net = random_network(5, 4, 2, 0.6, NOISY_RANGES)
        cfg = write_scenario(tmp_path, net, runs=40, iterations=80, seed=7,
                             rules={"a1": "identity", "c": "identity",
                                    "a2": "uniform"})
        one, two = tmp_path / "one", tmp_path / "two"
        monkeypatch.setenv("DIFFNET_THREADS", "1")
        assert main(["simulate", "--config", str(cfg), "--out", str(one)]) == EXIT_OK
        monkeypatch.setenv("DIFFNET_THREADS", "2")
        assert main(["simulate", "--config", str(cfg), "--out", str(two)]) == EXIT_OK
        assert (one / "curve.csv").read_bytes() == (two / "curve.csv").read_bytes()

    @pytest.mark.parametrize("value", ["abc", "0", "-2"])
    def test_bad_thread_env_is_config_error(self, value, tmp_path, monkeypatch):
        cfg = write_scenario(tmp_path, scalar_network(), runs=1, iterations=10)
        monkeypatch.setenv("DIFFNET_THREADS", value)
        assert main(["simulate", "--config", str(cfg)]) == EXIT_CONFIG


class TestTheory:
    def test_scalar_report_values(self, tmp_path):
        cfg = write_scenario(tmp_path, scalar_network(mu=0.01), runs=1,
                             iterations=10, outputs={"report": "report.json"})
        assert main(["theory", "--config", str(cfg)]) == EXIT_OK
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["rho_b"] == pytest.approx(0.99, abs=1e-12)
        expected = 10.0 * math.log10(0.01 ** 2 / (1.0 - 0.99 ** 2))
        assert data["msd_db"] == pytest.approx(expected, abs=1e-9)
        assert data["warnings"] == []
        assert data["mu_bounds"][0]["bound_tight"] == pytest.approx(2.0)

    def test_unstable_scenario_exits_3_but_writes_report(self, tmp_path):
        cfg = write_scenario(tmp_path, scalar_network(mu=5.0), runs=1,
                             iterations=10, outputs={"report": "report.json"})
        assert main(["theory", "--config", str(cfg)]) == EXIT_UNSTABLE
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["msd_db"] is None
        assert any(w.startswith("mean-unstable") for w in data["warnings"])

    def test_adaptive_rule_rejected(self, tmp_path):
        net = random_network(3, 4, 2, 0.6, NOISY_RANGES)
        cfg = write_scenario(tmp_path, net, runs=1, iterations=10,
                             rules={"a2": "adaptive"})
        assert main(["theory", "--config", str(cfg)]) == EXIT_CONFIG

    def test_tracking_report_for_random_walk_target(self, tmp_path):
        net = random_network(6, 4, 2, 0.6, NOISY_RANGES)
        net.weights = WeightTrajectory(mode="random_walk", w0=net.weights.w0,
                                       r_eta=1e-5 * np.eye(2, dtype=complex))
        cfg = write_scenario(tmp_path, net, runs=1, iterations=10,
                             rules={"a2": "uniform"})
        assert main(["theory", "--config", str(cfg)]) == EXIT_OK
        data = json.loads((tmp_path / "report.json").read_text())
        assert data["msd_track_db"] > data["msd_db"]


class TestCompare:
    def test_rules_ranked_by_theory(self, tmp_path):
        net = random_network(9, 6, 2, 0.5, NOISY_RANGES)
        cfg = write_scenario(tmp_path, net, runs=2, iterations=50,
                             rules={"a1": "identity", "c": "identity"})
        code = main(["compare", "--config", str(cfg),
                     "--rules", "uniform,metropolis,relative_variance"])
        assert code == EXIT_OK
        with open(tmp_path / "compare.csv") as fh:
            header = fh.readline().strip()
            rows = [line.strip().split(",") for line in fh]
        assert header == "rule,theory_msd_db,theory_emse_db,sim_msd_db,divergent_runs"
        assert len(rows) == 3
        values = [float(r[1]) for r in rows]
        assert values == sorted(values)

    def test_simulate_flag_adds_measured_column(self, tmp_path):
        net = random_network(10, 4, 2, 0.6, NOISY_RANGES)
        cfg = write_scenario(tmp_path, net, runs=4, iterations=300, seed=2,
                             rules={"a1": "identity", "c": "identity"})
        code = main(["compare", "--config", str(cfg),
                     "--rules", "uniform,adaptive", "--simulate"])
        assert code == EXIT_OK
        with open(tmp_path / "compare.csv") as fh:
            next(fh)
            rows = {line.split(",")[0]: line.strip().split(",") for line in fh}
        assert rows["adaptive"][1] == ""
        assert rows["adaptive"][3] != ""
        assert rows["uniform"][1] != "" and rows["uniform"][3] != ""

    def test_single_rule_rejected(self, tmp_path):
        cfg = write_scenario(tmp_path, scalar_network(), runs=1, iterations=10)
        assert main(["compare", "--config", str(cfg),
                     "--rules", "uniform"]) == EXIT_CONFIG

    def test_ambiguous_sweep_slot_rejected(self, tmp_path):
        net = random_network(11, 4, 2, 0.6, NOISY_RANGES)
        cfg = write_scenario(tmp_path, net, runs=1, iterations=10,
                             rules={"a1": "uniform", "a2": "uniform"})
        assert main(["compare", "--config", str(cfg),
                     "--rules", "uniform,metropolis"]) == EXIT_CONFIG


class TestConsoleEntryPoint:
    def test_installed_script_runs(self, tmp_path):
        exe = shutil.which("diffnet")
        assert exe is not None
        out = subprocess.run(
            [exe, "gen-scenario", "--preset", "tracking_low_noise",
             "--out", str(tmp_path)],
            capture_output=True, text=True,
        )
        assert out.returncode == EXIT_OK
        assert (tmp_path / "scenario.json").exists()
        assert "wrote" in out.stdout
