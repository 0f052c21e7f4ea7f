"""Scenario generation, schemes, experiments, config ingestion and the CLI."""

import csv
import math

import numpy as np
import pytest

from uavsense.bench import (
    EXPERIMENT_IDS,
    Scenario,
    ScenarioConfig,
    audit_solution,
    fsl_plan,
    generate_scenario,
    load_config,
    nc_config,
    parse_config_text,
    run_experiment,
    run_scheme,
)
from uavsense.cli import main as cli_main
from uavsense.itsso import ItssoConfig


class TestGeneration:
    def test_deterministic(self):
        a = generate_scenario(ScenarioConfig(seed=42))
        b = generate_scenario(ScenarioConfig(seed=42))
        assert a.uav_starts == b.uav_starts
        assert a.routes == b.routes
        assert all(a.tasks[j] == b.tasks[j] for j in a.tasks)

    def test_equal_split_and_distinct_workers(self):
        sc = generate_scenario(ScenarioConfig(seed=7))
        assert all(len(r) == 4 for r in sc.routes.values())
        for task in sc.tasks.values():
            assert len(task.workers) == 4
            assert len(set(task.workers)) == 4

    def test_q1_topology(self):
        sc = generate_scenario(ScenarioConfig(m=20, n=20, q=1, k=10, seed=3))
        for task in sc.tasks.values():
            assert len(task.workers) == 1

    def test_task_coordinates_uniform(self):
        xs = []
        for seed in range(100):
            sc = generate_scenario(ScenarioConfig(m=100, n=100, q=1, k=10, seed=seed))
            xs.extend(t.location.x for t in sc.tasks.values())
        assert len(xs) == 10000
        assert abs(float(np.mean(xs)) - 250.0) < 5.0

    def test_altitude_floor_on_starts(self):
        sc = generate_scenario(ScenarioConfig(seed=11))
        assert all(p.z >= 10.0 for p in sc.uav_starts.values())

    def test_divisibility_enforced(self):
        with pytest.raises(ValueError):
            ScenarioConfig(m=7, n=20, q=4)

    def test_nc_variant_matches_tasks(self):
        base = ScenarioConfig(seed=5)
        nc = nc_config(base)
        assert nc.q == 1 and nc.m == 5 and nc.scheme == "nc"
        a = generate_scenario(base)
        b = generate_scenario(nc)
        # paired instances share the task field
        assert all(a.tasks[j].location == b.tasks[j].location for j in a.tasks)


class TestSchemes:
    def test_fsl_pins_altitude_and_skips_placement(self):
        sc = generate_scenario(ScenarioConfig(seed=2, scheme="fsl"))
        sol = fsl_plan(sc, ItssoConfig(rng_seed=2))
        for p in sol.plans:
            for loc in p.sensing_locations:
                assert loc.z == 50.0
        assert sol.placement_passes == 0
        assert sol.assignment is None

    def test_fsl_audit_skips_sensing_probability(self):
        sc = generate_scenario(ScenarioConfig(seed=2, scheme="fsl"))
        sol = fsl_plan(sc, ItssoConfig(rng_seed=2), record_trace=True)
        assert audit_solution(sc, sol) == []

    def test_all_schemes_audit_clean(self):
        for scheme in ("itsso", "nc", "fsl"):
            cfg = ScenarioConfig(seed=4)
            cfg = nc_config(cfg) if scheme == "nc" else (
                ScenarioConfig(seed=4, scheme=scheme))
            sc = generate_scenario(cfg)
            sol = run_scheme(sc, ItssoConfig(rng_seed=4), record_trace=True)
            assert audit_solution(sc, sol) == []


class TestExperiments:
    def test_unknown_id_rejected(self):
        with pytest.raises(ValueError):
            run_experiment("fig99", instances=1)

    def test_fig5_structure_and_raw_consistency(self, tmp_path):
        res = run_experiment("fig5", instances=2, out_dir=tmp_path, seed=50)
        xs = sorted({row[1] for row in res.rows})
        assert xs == [2.0, 4.0, 6.0, 8.0]
        schemes = {row[0] for row in res.rows}
        assert schemes == {"itsso", "nc", "fsl"}
        for scheme, x, mean, std, n in res.rows:
            raw = res.raw_values(scheme, x)
            assert n == 2 == len(raw)
            assert mean == pytest.approx(float(np.mean(raw)))
        # CSV audit: means in the summary equal the mean of the raw dump
        with open(tmp_path / "fig5.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        with open(tmp_path / "fig5_raw.csv", newline="") as fh:
            raw_rows = list(csv.DictReader(fh))
        for row in rows:
            vals = [float(r["t_max"]) for r in raw_rows
                    if r["scheme"] == row["scheme"] and r["x"] == row["x"]]
            assert float(row["mean_Tmax"]) == pytest.approx(float(np.mean(vals)))
        assert (tmp_path / "fig5_manifest.txt").exists()

    def test_fig8_min_group_size(self):
        res = run_experiment("fig8", instances=1, seed=60)
        sim = {x: mean for scheme, x, mean, _, _ in res.rows if scheme == "simulated"}
        theo = {x: mean for scheme, x, mean, _, _ in res.rows if scheme == "theoretical"}
        assert sim[1.0] == 1 and sim[6.0] == 6
        for x in sim:
            assert abs(sim[x] - theo[x]) <= 1

    def test_deterministic_rerun(self, tmp_path):
        a = run_experiment("fig4", instances=1, seed=70)
        b = run_experiment("fig4", instances=1, seed=70)
        assert a.rows == b.rows and a.raw == b.raw


class TestConfigFile:
    def test_defaults_from_empty(self):
        cfg = parse_config_text("# only a comment\n")
        assert cfg == ScenarioConfig()

    def test_full_parse(self):
        text = """
        M = 10
        N = 20
        K = 5
        q = 2
        seed = 99
        scheme = fsl
        data_size = 1.5e7
        fsl_height = 60
        area.x = 400
        area.y = 300
        area.z = 90
        channel.bs_height = 30
        channel.carrier_freq = 2.5
        channel.subcarrier_bandwidth = 2e6
        channel.noise_power = -100
        channel.tx_power = 20
        channel.slot_duration = 0.5
        sensing.lambda = 0.02
        sensing.pr_th = 0.8
        kinematics.v_max = 40
        kinematics.h_min = 15
        """
        cfg = parse_config_text(text)
        assert cfg.m == 10 and cfg.n == 20 and cfg.k == 5 and cfg.q == 2
        assert cfg.seed == 99 and cfg.scheme == "fsl"
        assert cfg.data_size == 1.5e7 and cfg.fsl_height == 60
        assert cfg.area == (400, 300, 90)
        assert cfg.channel.bs_height == 30 and cfg.channel.carrier_freq == 2.5
        assert cfg.sensing.lam == 0.02 and cfg.sensing.pr_th == 0.8
        assert cfg.kinematics.v_max == 40 and cfg.kinematics.h_min == 15

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="unknown config key"):
            parse_config_text("M = 10\nbogus = 3\n")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            parse_config_text("M = 10\nM = 12\n")

    def test_bad_value_rejected(self):
        with pytest.raises(ValueError, match="bad value"):
            parse_config_text("M = ten\n")

    def test_load_config(self, tmp_path):
        path = tmp_path / "scenario.cfg"
        path.write_text("M = 5\nN = 5\nq = 1\nK = 5\nseed = 8\n")
        cfg = load_config(path)
        assert cfg.m == 5 and cfg.seed == 8


SMALL_CFG = "M = 2\nN = 2\nq = 1\nK = 2\nseed = 12\n"


class TestCli:
    def test_simulate_and_validate(self, tmp_path, capsys):
        cfg = tmp_path / "small.cfg"
        cfg.write_text(SMALL_CFG)
        trace = tmp_path / "trace.csv"
        export = tmp_path / "solution.json"
        rc = cli_main(["simulate", "--config", str(cfg), "--trace", str(trace),
                       "--export", str(export)])
        out = capsys.readouterr().out
        assert rc == 0
        assert "constraint audit: PASS" in out
        assert trace.exists() and export.exists()

        rc = cli_main(["validate", "--trace", str(trace), "--config", str(cfg)])
        out = capsys.readouterr().out
        assert rc == 0 and "PASS" in out

    def test_validate_rejects_mismatched_seed(self, tmp_path, capsys):
        cfg = tmp_path / "small.cfg"
        cfg.write_text(SMALL_CFG)
        trace = tmp_path / "trace.csv"
        assert cli_main(["simulate", "--config", str(cfg), "--trace", str(trace)]) == 0
        capsys.readouterr()
        rc = cli_main(["validate", "--trace", str(trace), "--config", str(cfg),
                       "--seed", "999"])
        out = capsys.readouterr().out
        assert rc == 1 and "FAIL" in out

    def test_analyze_ops(self, capsys):
        assert cli_main(["analyze", "--op", "dtdq"]) == 0
        assert capsys.readouterr().out.strip() == "-1.479279"
        assert cli_main(["analyze", "--op", "dtdpr"]) == 0
        assert capsys.readouterr().out.strip() == "25.697712"
        assert cli_main(["analyze", "--op", "minq", "--pr-th", "0.999999"]) == 0
        assert capsys.readouterr().out.strip() == "6"

    def test_experiment_command(self, tmp_path, capsys):
        rc = cli_main(["experiment", "--id", "fig8", "--instances", "1",
                       "--out", str(tmp_path), "--seed", "5"])
        out = capsys.readouterr().out
        assert rc == 0
        assert (tmp_path / "fig8.csv").exists()
        assert "simulated" in out
