"""Scenario dispatch and the on-disk layout of a run directory.

A run directory holds ``trajectory.csv``, ``run.json`` (config echo, log
metadata and events), ``metrics.json``, optional ``diagnostics.jsonl`` and the
SVG figures.  A map directory holds ``singular_points.csv``,
``sigma_field.csv``, ``obstacles.obj`` and ``singular_cloud.svg``.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from ._io import atomic_write_text
from .arm import run_arm_scenario
from .config import ScenarioConfig
from .errors import ScenarioFailed
from .metrics import MetricsReport, compute_metrics
from .plots import emit_plots, plot_singular_cloud
from .singularity import write_point_cloud_csv
from .suture import SingularObstacles, map_singular_set, run_suturing_scenario
from .trajectory import TrajectoryLog

log = logging.getLogger(__name__)

TRAJECTORY = "trajectory.csv"
RUN_JSON = "run.json"
METRICS_JSON = "metrics.json"
DIAGNOSTICS = "diagnostics.jsonl"


@dataclass
class RunResult:
    log: Optional[TrajectoryLog]
    report: Optional[MetricsReport]
    outdir: Optional[Path] = None
    files: List[Path] = field(default_factory=list)
    obstacles: Optional[SingularObstacles] = None


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=float) + "\n"


def simulate(cfg: ScenarioConfig, cbf: Optional[bool] = None, obstacles: Optional[SingularObstacles] = None,
             on_step=None) -> RunResult:
    """Run one closed loop in memory.  ``cbf`` overrides the config flag."""
    cbf = cfg.cbf if cbf is None else cbf
    sim = cfg.sim_config()
    t0 = time.perf_counter()
    if cfg.scenario == "ArmSpike":
        trace = run_arm_scenario(cfg.arm_parameters(), cfg.arm_scenario(cbf), sim, on_step=on_step)
    elif cfg.scenario == "MagneticSuture":
        rig = cfg.rig_model()
        if cbf and cfg.suture.obstacles and obstacles is None:
            obstacles = map_singular_set(rig, cfg.map_config())
        trace = run_suturing_scenario(rig, cfg.path(), obstacles if (cbf and cfg.suture.obstacles) else None,
                                      cfg.suture_config(cbf), sim, x0=cfg.suture.x0, on_step=on_step)
    else:
        raise ScenarioFailed(f"{cfg.scenario} has no closed loop; use the map pipeline")
    trace.meta["wall_time"] = time.perf_counter() - t0
    trace.meta["seed"] = cfg.seed
    return RunResult(trace, compute_metrics(trace), obstacles=obstacles)


def save_run(result: RunResult, cfg: ScenarioConfig, outdir, plots: bool = True) -> List[Path]:
    outdir = Path(outdir)
    trace = result.log
    files = [trace.to_csv(outdir / TRAJECTORY)]
    files.append(atomic_write_text(outdir / RUN_JSON, _json({
        "config": cfg.model_dump(mode="json"),
        "meta": trace.meta,
        "events": trace.events,
    })))
    files.append(atomic_write_text(outdir / METRICS_JSON, result.report.to_json()))
    if plots:
        files.extend(emit_plots(trace, outdir))
    return files


def load_run(outdir) -> TrajectoryLog:
    outdir = Path(outdir)
    trace = TrajectoryLog.from_csv(outdir / TRAJECTORY)
    info_path = outdir / RUN_JSON
    if info_path.exists():
        info = json.loads(info_path.read_text())
        trace.meta.update(info.get("meta", {}))
        trace.events = list(info.get("events", []))
    return trace


def run_map(cfg: ScenarioConfig, outdir=None, plots: bool = True) -> RunResult:
    """Sample the rig's singular set, mesh it, and write the point cloud, grid and OBJ."""
    t0 = time.perf_counter()
    obstacles = map_singular_set(cfg.rig_model(), cfg.map_config())
    wall = time.perf_counter() - t0
    result = RunResult(None, None, obstacles=obstacles)
    if outdir is not None:
        outdir = Path(outdir)
        result.outdir = outdir
        result.files = [
            write_point_cloud_csv(obstacles.samples, outdir / "singular_points.csv", n=3),
            obstacles.field.to_csv(outdir / "sigma_field.csv"),
            obstacles.mesh.to_obj(outdir / "obstacles.obj", scale=obstacles.frame),
            atomic_write_text(outdir / "map.json", _json({
                "config": cfg.model_dump(mode="json"),
                "n_samples": len(obstacles.samples),
                "n_triangles": int(len(obstacles.mesh.triangles)),
                "n_components": obstacles.mesh.n_components,
                "threshold": obstacles.threshold,
                "wall_time": wall,
            })),
        ]
        if plots:
            result.files.extend(plot_singular_cloud([s.state for s in obstacles.samples], outdir))
    log.info("map: %d samples, %d components", len(obstacles.samples), obstacles.mesh.n_components)
    return result


def run_scenario(cfg: ScenarioConfig, outdir=None, cbf: Optional[bool] = None) -> RunResult:
    """Run the configured scenario and write its artifacts to ``outdir``.

    Raises ScenarioFailed after writing when more QPs were infeasible than
    ``cfg.max_infeasible`` allows.
    """
    if outdir is None and cfg.output_dir is not None:
        outdir = cfg.output_dir
    if cfg.scenario == "SingularMap":
        return run_map(cfg, outdir, cfg.plots)
    diag_lines = []
    on_step = None
    if cfg.diagnostics and outdir is not None:
        on_step = lambda t, d: diag_lines.append(json.dumps(d.to_json(t), sort_keys=True))  # noqa: E731
    result = simulate(cfg, cbf, on_step=on_step)
    if outdir is not None:
        result.outdir = Path(outdir)
        result.files = save_run(result, cfg, outdir, cfg.plots)
        if on_step is not None:
            result.files.append(atomic_write_text(Path(outdir) / DIAGNOSTICS, "\n".join(diag_lines) + "\n"))
    n_bad = result.report.qp_infeasible_count
    if n_bad > cfg.max_infeasible:
        raise ScenarioFailed(f"{cfg.scenario}: {n_bad} infeasible QP steps (tolerance {cfg.max_infeasible})")
    return result


def run_pair(cfg: ScenarioConfig, outdir=None) -> RunResult:
    """Filtered and unfiltered runs of one scenario; the report carries the spike ratio.

    With ``outdir`` the runs go to ``outdir/cbf`` and ``outdir/nocbf`` and the
    comparison figures and metrics to ``outdir``.
    """
    on = simulate(cfg, True)
    off = simulate(cfg, False, obstacles=on.obstacles)
    report = compute_metrics(on.log, off.log)
    result = RunResult(on.log, report, obstacles=on.obstacles)
    if outdir is not None:
        outdir = Path(outdir)
        result.outdir = outdir
        files = save_run(on, cfg, outdir / "cbf", cfg.plots)
        files += save_run(off, cfg, outdir / "nocbf", cfg.plots)
        files.append(atomic_write_text(outdir / METRICS_JSON, report.to_json()))
        if cfg.plots:
            files += emit_plots(on.log, outdir, baseline=off.log)
        result.files = files
    return result


def compare_runs(dir_cbf, dir_nocbf, plots_dir=None) -> MetricsReport:
    on, off = load_run(dir_cbf), load_run(dir_nocbf)
    report = compute_metrics(on, off)
    if plots_dir is not None:
        emit_plots(on, plots_dir, baseline=off)
    return report
