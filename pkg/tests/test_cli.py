import json

import numpy as np
import pytest

from anosov_lab.cli import main
from anosov_lab.errors import ConfigError
from anosov_lab.pipelines import ExperimentConfig
from anosov_lab.tables import gen_platonic_table, table_from_dict

ICO55 = {"generator": "icosahedron", "radius": 0.55}


def run(tmp_path, pipeline, cfg, *extra, name="run"):
    cfg_path = tmp_path / f"{name}.json"
    cfg_path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main([pipeline, "--config", str(cfg_path), "--out", str(out), *extra])
    report = json.loads((out / "report.json").read_text()) if (out / "report.json").exists() else None
    return code, report, out


def test_horizon_pipeline(tmp_path):
    code, rep, out = run(tmp_path, "horizon", {"table": ICO55})
    assert code == 0 and rep["verdict"] == "success"
    assert rep["result"]["horizon"]["H"] == pytest.approx(0.94303, abs=1e-4)
    assert (out / "table.svg").read_text().startswith("<svg")


def test_certify_billiard_certified(tmp_path):
    code, rep, _ = run(tmp_path, "certify-billiard",
                       {"table": ICO55, "params": {"n_samples": 40, "t_horizon": 10.0}})
    assert code == 0 and rep["verdict"] == "certified"
    assert rep["result"]["analytic"]["certified"] is True


def test_certify_billiard_counterexample_writes_witness(tmp_path):
    cfg = {"table": {"generator": "octahedron", "radius": 0.7},
           "params": {"n_samples": 40, "t_horizon": 10.0}}
    code, rep, out = run(tmp_path, "certify-billiard", cfg)
    assert code in (1, 2)
    if code == 1:
        assert (out / "witness_orbit.csv").exists()
        assert (out / "witness_riccati.csv").exists()


@pytest.mark.parametrize("cfg", [
    {"table": {"generator": "icosahedron", "radius": -0.5}},
    {"table": {"generator": "dodecahedron", "radius": 0.5}},
    {"table": {"obstacles": [{"center": [0, 0, 1], "radius": 1.0},
                             {"center": [0, 0.5, 0.86], "radius": 1.0}]}},
    {"table": ICO55, "bogus": 1},
    {"table": ICO55, "params": {"not_a_param": 1}},
    {"table": ICO55, "params": {"grid_n": 0}},
    {},
])
def test_config_errors_exit_3(tmp_path, cfg):
    code, rep, _ = run(tmp_path, "horizon", cfg)
    assert code == 3 and rep is None


def test_surface_param_errors_exit_3(tmp_path):
    code, _, _ = run(tmp_path, "certify-surface", {"table": ICO55, "params": {"m": 0.1, "nu": 0.05}})
    assert code == 3
    code, _, _ = run(tmp_path, "build-surface", {"table": ICO55, "params": {"epsilon": 2.0}},
                     name="b")
    assert code == 3
    code, _, _ = run(tmp_path, "build-surface", {"table": ICO55, "params": {"delta": 0.1}},
                     name="c")
    assert code == 3


def test_unreadable_config_exit_3(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["horizon", "--config", str(bad)]) == 3
    assert main(["horizon", "--config", str(tmp_path / "missing.json")]) == 3
    bad.write_text("[1, 2]")
    assert main(["horizon", "--config", str(bad)]) == 3


def test_reports_are_deterministic(tmp_path):
    cfg = {"table": ICO55, "params": {"n_samples": 30, "t_horizon": 8.0}, "seed": 5}
    _, _, a = run(tmp_path, "certify-billiard", cfg, name="a")
    _, _, b = run(tmp_path, "certify-billiard", cfg, "--workers", "2", name="b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    cfg = {"table": ICO55, "params": {"n_orbits": 3, "t_end": 20.0}, "seed": 1}
    _, r1, _ = run(tmp_path, "lyapunov-sweep", cfg, name="a")
    _, r2, _ = run(tmp_path, "lyapunov-sweep", cfg, "--seed", "2", name="b")
    assert r1["seed"] == 1 and r2["seed"] == 2
    assert r1["result"]["sweep"] != r2["result"]["sweep"]


def test_report_table_round_trip(tmp_path):
    _, rep, _ = run(tmp_path, "horizon", {"table": ICO55})
    t = table_from_dict(rep["table"])
    ref = gen_platonic_table("icosahedron", 0.55)
    assert np.allclose(t.centers, ref.centers) and np.allclose(t.radii, ref.radii)


def test_workers_from_environment(monkeypatch):
    cfg = ExperimentConfig.from_dict({"table": ICO55}, "horizon")
    monkeypatch.delenv("ANOSOV_LAB_WORKERS", raising=False)
    assert cfg.n_workers() == 1
    monkeypatch.setenv("ANOSOV_LAB_WORKERS", "3")
    assert cfg.n_workers() == 3
    cfg.workers = 2
    assert cfg.n_workers() == 2


def test_params_of_other_pipelines_are_ignored():
    cfg = ExperimentConfig.from_dict({"table": ICO55, "params": {"epsilon": 0.5, "grid_n": 500}},
                                     "horizon")
    assert cfg.params == {"grid_n": 500}
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"table": ICO55}, "no-such-pipeline")


def test_euclidean_obstruction_pipeline(tmp_path):
    code, rep, out = run(tmp_path, "euclidean-obstruction", {})
    assert code == 0
    assert rep["result"]["euclidean"]["verdict"] == "conjugate_points_found"
    assert rep["result"]["spherical_twin"]["verdict"] == "none_within_horizon"
    assert (out / "euclidean_profile.svg").exists()


def test_lyapunov_sweep_pipeline(tmp_path):
    cfg = {"table": {"generator": "icosahedron", "radius": 0.5},
           "params": {"radii": [0.5, 0.55], "n_orbits": 3, "t_end": 30.0}}
    code, rep, out = run(tmp_path, "lyapunov-sweep", cfg)
    assert code == 0
    assert [r["radius"] for r in rep["result"]["sweep"]] == [0.5, 0.55]
    lines = (out / "lyapunov.csv").read_text().splitlines()
    assert lines[0] == "radius,orbits,mean,min,max" and len(lines) == 3


def test_build_surface_pipeline(tmp_path):
    cfg = {"table": {"obstacles": [{"center": [0, 0, 1], "radius": 0.5},
                                   {"center": [0, 0, -1], "radius": 0.5}]},
           "params": {"resolution": 128}}
    code, rep, out = run(tmp_path, "build-surface", cfg)
    assert code == 0
    mesh = rep["result"]["mesh"]
    assert mesh["genus"] == 1 and mesh["euler_characteristic"] == 0
    assert rep["result"]["gauss_bonnet"]["pass"]
    for f in ("surface.obj", "surface.K.csv", "profile.svg"):
        assert (out / f).exists()


def test_certify_surface_pipeline(tmp_path):
    cfg = {"table": {"generator": "icosahedron", "radius": 0.5},
           "params": {"n_samples": 3, "window": 20.0, "grid_n": 4000}}
    code, rep, _ = run(tmp_path, "certify-surface", cfg)
    assert code == 0 and rep["verdict"] == "certified"
    assert rep["result"]["assumptions"]["passed"] is True
    assert rep["result"]["certificate"]["worst_margin"] > 0
