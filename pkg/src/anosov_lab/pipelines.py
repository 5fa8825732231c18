"""Experiment configs and the end-to-end pipelines driven by the command line."""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import AnosovLabError, ConfigError
from .sphere import BilliardTable
from .tables import gen_platonic_table, table_from_dict, table_to_dict

PIPELINES = ("horizon", "certify-billiard", "certify-surface", "build-surface",
             "euclidean-obstruction", "lyapunov-sweep")

EXIT = {"certified": 0, "success": 0, "counterexample": 1, "inconclusive": 2, "config": 3}

DEFAULTS = {
    "horizon": {"grid_n": 20000, "refine_iters": 3},
    "certify-billiard": {"grid_n": 20000, "n_samples": 1000, "t_horizon": 20.0,
                         "m": None, "grazing_tol": 1e-9},
    "certify-surface": {"epsilon": 1e-3, "delta": None, "sheet_offset": None, "m": 0.01,
                        "nu": 0.05, "window": 40.0, "n_samples": 2000, "tol": 1e-10,
                        "grid_n": 20000},
    "build-surface": {"epsilon": 1.0, "delta": None, "sheet_offset": None,
                      "ambient": "spherical", "resolution": 256, "assumption_samples": 64},
    "euclidean-obstruction": {"R": 0.5, "delta1": 0.3, "delta2": 0.02,
                              "twin_epsilon": 1e-3},
    "lyapunov-sweep": {"radii": None, "n_orbits": 20, "t_end": 200.0},
}

TABLE_FREE = {"euclidean-obstruction"}


@dataclass
class ExperimentConfig:
    pipeline: str
    table: dict | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    workers: int | None = None
    out: str = "out"

    @classmethod
    def from_dict(cls, d: dict, pipeline: str | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(d) - {"pipeline", "table", "params", "seed", "workers", "out"}
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        name = pipeline or d.get("pipeline")
        if name not in PIPELINES:
            raise ConfigError(f"unknown pipeline {name!r}")
        params = dict(d.get("params") or {})
        known = set().union(*DEFAULTS.values())
        unknown = set(params) - known
        if unknown:
            raise ConfigError(f"unknown parameters: {sorted(unknown)}")
        # parameters of other pipelines are ignored so one file can drive several
        params = {k: v for k, v in params.items() if k in DEFAULTS[name]}
        cfg = cls(name, d.get("table"), params, int(d.get("seed", 0)), d.get("workers"),
                  str(d.get("out", "out")))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path, pipeline: str | None = None) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                d = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(d, pipeline)

    def param(self, key):
        return self.params.get(key, DEFAULTS[self.pipeline][key])

    def validate(self) -> None:
        if self.pipeline not in TABLE_FREE:
            self.build_table()
        for key in ("n_samples", "n_orbits", "grid_n", "resolution"):
            if key in self.params and int(self.params[key]) <= 0:
                raise ConfigError(f"{key} must be positive")
        eps = self.params.get("epsilon")
        if eps is not None and not 0.0 < float(eps) <= 1.0:
            raise ConfigError("epsilon must lie in (0, 1]")
        m, nu = self.params.get("m"), self.params.get("nu")
        if self.pipeline == "certify-surface":
            m = DEFAULTS[self.pipeline]["m"] if m is None else m
            nu = DEFAULTS[self.pipeline]["nu"] if nu is None else nu
            if not 0.0 < m < nu:
                raise ConfigError("need 0 < m < nu")

    def build_table(self) -> BilliardTable:
        spec = self.table
        if not isinstance(spec, dict):
            raise ConfigError("a table spec is required")
        try:
            if "generator" in spec:
                return gen_platonic_table(spec["generator"], float(spec["radius"]))
            if "obstacles" in spec:
                return table_from_dict(spec)
        except (AnosovLabError, ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"invalid table: {exc}") from exc
        raise ConfigError("table needs 'generator' and 'radius' or an 'obstacles' list")

    def n_workers(self) -> int:
        if self.workers is not None:
            return max(1, int(self.workers))
        return max(1, int(os.environ.get("ANOSOV_LAB_WORKERS", "1")))


def _clean(x):
    """JSON-safe copy: non-finite floats become null, arrays become lists."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(x) if math.isfinite(x) else None
    return x


def write_report(path: Path, report: dict) -> None:
    path.write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------

def _horizon(cfg, table, out):
    from .horizon import horizon
    from .render import render_table_svg

    h = horizon(table, grid_n=int(cfg.param("grid_n")),
                refine_iters=int(cfg.param("refine_iters")))
    render_table_svg(table, out / "table.svg", arc_points=h.arc_points(256))
    return "success", {"horizon": h.to_dict()}


def _certify_billiard(cfg, table, out):
    from .horizon import horizon
    from .render import render_table_svg
    from .riccati import (RiccatiValue, analytic_certificate, billiard_riccati_trace,
                          sampled_certificate)

    h = horizon(table, grid_n=int(cfg.param("grid_n")))
    A = table.max_radius
    res = {"horizon": h.to_dict(), "A": A}
    if h.unbounded:
        res["analytic"] = {"certified": False, "reason": "free great circle"}
        return "counterexample", res
    av = analytic_certificate(A, h.H)
    res["analytic"] = {"certified": av.certified, "lhs": av.lhs, "rhs": av.rhs,
                       "sum_condition": av.sum_condition, "m": av.m}
    m = cfg.param("m")
    if m is None:
        m = av.m - 1e-6 if av.certified else 0.0
    # every flight is at most H long and at least the smallest gap
    C = min(h.H + h.grid_spacing, math.pi / 2)
    c = table.min_gap() if table.n > 1 else 0.0
    A_bound = math.tan(C)
    rep = sampled_certificate(table, int(cfg.param("n_samples")), float(cfg.param("t_horizon")),
                              m, c, C, A_bound, seed=cfg.seed,
                              grazing_tol=float(cfg.param("grazing_tol")),
                              workers=cfg.n_workers())
    res["sampled"] = rep.to_dict()
    if rep.witness is not None:
        trace = rep.witness
        trace.to_csv(out / "witness_orbit.csv")
        path = billiard_riccati_trace(trace, table, 0.0, RiccatiValue.of(0.0))
        path.to_csv(out / "witness_riccati.csv", trace.total_time)
        res["sampled"]["witness_trace"] = "witness_riccati.csv"
        pts = np.array([trace.state_at(t).q for t in
                        np.linspace(0.0, trace.total_time, 2000)])
        render_table_svg(table, out / "table.svg", arc_points=h.arc_points(256),
                         trajectories=[pts])
    else:
        render_table_svg(table, out / "table.svg", arc_points=h.arc_points(256))
    if rep.verdict == "counterexample":
        verdict = "counterexample"
    elif rep.verdict == "certified" and av.certified:
        verdict = "certified"
    else:
        verdict = "inconclusive"
    return verdict, res


def _certify_surface(cfg, table, out):
    from .dynamics import anosov_certificate
    from .horizon import horizon
    from .surface import build_sigma, default_delta, verify_assumptions

    m, nu = float(cfg.param("m")), float(cfg.param("nu"))
    delta = cfg.param("delta")
    if delta is None:
        # the tube width must sit well below m^2 for missed tubes to be harmless
        delta = min(default_delta(table), 0.1 * m * m)
    try:
        asm = build_sigma(table, delta=float(delta), sheet_offset=cfg.param("sheet_offset"))
    except (AnosovLabError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    asm = asm.flatten(float(cfg.param("epsilon")))
    assumptions = verify_assumptions(asm)
    H = horizon(table, grid_n=int(cfg.param("grid_n"))).H
    rep = anosov_certificate(asm, int(cfg.param("n_samples")), m=m, nu=nu,
                             window=float(cfg.param("window")), H=H, seed=cfg.seed,
                             workers=cfg.n_workers(), tol=float(cfg.param("tol")))
    res = {"assembly": asm.to_dict(), "assumptions": assumptions.to_dict(),
           "certificate": rep.to_dict(), "H": H}
    res["certificate"]["witness_sample"] = rep.witness
    return rep.verdict, res


def _build_surface(cfg, table, out):
    from .mesh import export_mesh, gauss_bonnet_integral
    from .render import render_profile_svg
    from .surface import build_sigma, verify_assumptions

    try:
        asm = build_sigma(table, delta=cfg.param("delta"), sheet_offset=cfg.param("sheet_offset"),
                          ambient=str(cfg.param("ambient")))
    except (AnosovLabError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    asm = asm.flatten(float(cfg.param("epsilon")))
    assumptions = verify_assumptions(asm, n_samples=int(cfg.param("assumption_samples")),
                                     seed=cfg.seed)
    mesh = export_mesh(asm, int(cfg.param("resolution")), out / "surface.obj")
    total = gauss_bonnet_integral(asm, mesh)
    target = 2 * math.pi * (2 - 2 * asm.genus)
    tol = 0.01 * max(abs(target), 4 * math.pi)
    render_profile_svg(asm.tubes[0], out / "profile.svg")
    res = {"assembly": asm.to_dict(), "assumptions": assumptions.to_dict(),
           "mesh": {"vertices": len(mesh.vertices), "triangles": len(mesh.triangles),
                    "euler_characteristic": mesh.euler_characteristic, "genus": asm.genus,
                    "obj": "surface.obj", "curvature_csv": "surface.K.csv"},
           "gauss_bonnet": {"integral": total, "target": target, "tolerance": tol,
                            "pass": abs(total - target) <= tol}}
    ok = (assumptions.passed and res["gauss_bonnet"]["pass"]
          and mesh.euler_characteristic == 2 - 2 * asm.genus)
    return ("success" if ok else "inconclusive"), res


def _euclidean_obstruction(cfg, table, out):
    from .dynamics import euclidean_tube_bound, spherical_twin_check
    from .profile import euclidean_tube_profile
    from .render import render_profile_svg
    from .surface import RevolutionSurface

    R, d1, d2 = float(cfg.param("R")), float(cfg.param("delta1")), float(cfg.param("delta2"))
    try:
        prof = euclidean_tube_profile(R, d1, d2)
    except (AnosovLabError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    surf = RevolutionSurface(prof, np.array([0.0, 0.0, 1.0]), "euclidean")
    rep = euclidean_tube_bound(surf, d2)
    twin = spherical_twin_check(R, d1, float(cfg.param("twin_epsilon")),
                                window=rep.exit_time)
    render_profile_svg(surf, out / "euclidean_profile.svg")
    res = {"euclidean": rep.to_dict(), "spherical_twin": twin.to_dict()}
    ok = (rep.verdict == "conjugate_points_found" and rep.integral_value >= rep.bound_value - 1e-6
          and twin.verdict == "none_within_horizon")
    return ("success" if ok else "inconclusive"), res


def _lyapunov_sweep(cfg, table, out):
    from .billiard import sample_phase_points
    from .dynamics import billiard_lyapunov
    from .errors import StepUnderflow

    radii = cfg.param("radii")
    spec = cfg.table or {}
    tables = []
    if radii is not None:
        if "generator" not in spec:
            raise ConfigError("a radius sweep needs a generator table")
        for r in radii:
            try:
                tables.append((float(r), gen_platonic_table(spec["generator"], float(r))))
            except AnosovLabError as exc:
                raise ConfigError(str(exc)) from exc
    else:
        tables.append((table.max_radius, table))
    rng = np.random.default_rng(cfg.seed)
    t_end = float(cfg.param("t_end"))
    rows = []
    for r, t in tables:
        est = []
        for s in sample_phase_points(t, rng, int(cfg.param("n_orbits"))):
            try:
                est.append(billiard_lyapunov(t, s, t_end))
            except StepUnderflow:
                continue
        est = np.array(est)
        rows.append({"radius": r, "orbits": len(est), "mean": est.mean() if len(est) else None,
                     "min": est.min() if len(est) else None,
                     "max": est.max() if len(est) else None})
    with open(out / "lyapunov.csv", "w") as fh:
        fh.write("radius,orbits,mean,min,max\n")
        for row in rows:
            fh.write(",".join(repr(row[k]) for k in ("radius", "orbits", "mean", "min", "max"))
                     + "\n")
    return "success", {"sweep": rows, "t_end": t_end}


RUNNERS = {
    "horizon": _horizon,
    "certify-billiard": _certify_billiard,
    "certify-surface": _certify_surface,
    "build-surface": _build_surface,
    "euclidean-obstruction": _euclidean_obstruction,
    "lyapunov-sweep": _lyapunov_sweep,
}


def run_pipeline(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Run one pipeline, write ``report.json`` (and data files) into ``cfg.out``
    and return ``(exit_code, report)``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    table = None if cfg.pipeline in TABLE_FREE and cfg.table is None else cfg.build_table()
    verdict, result = RUNNERS[cfg.pipeline](cfg, table, out)
    report = {
        "pipeline": cfg.pipeline,
        "seed": cfg.seed,
        "params": {k: cfg.param(k) for k in DEFAULTS[cfg.pipeline]},
        "table": table_to_dict(table) if table is not None else None,
        "verdict": verdict,
        "exit_code": EXIT[verdict],
        "result": result,
    }
    write_report(out / "report.json", report)
    return EXIT[verdict], _clean(report)
