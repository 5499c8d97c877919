"""Singular-set obstacles for the magnetic rig and the closed-loop suturing run."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .cbf import ClassKFunction, CostSpec, ObstacleBarrier, safety_filter
from .dynamics import SimulatorConfig, step
from .errors import ConfigurationError, QPInfeasible
from .geometry import GridAxis, GridField, PointCloud, TriangleMesh, extract_boundary_mesh, periodic_extend
from .magnetic import MagneticRig, reference_current_controller
from .singularity import SingularitySample, sample_singular_set, sigma_min_field
from .trajectory import TrajectoryLog, wrap_angle

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SingularMapConfig:
    """Grid over (x mm, y mm, theta rad) and the singular-value threshold."""

    x_range: Tuple[float, float] = (-17.5, 17.5)
    y_range: Tuple[float, float] = (-17.5, 17.5)
    theta_range: Tuple[float, float] = (-np.pi, np.pi)
    counts: Tuple[int, int, int] = (40, 40, 60)
    threshold: float = 0.4
    # theta span of the meshed field on the covering space
    theta_cover: Tuple[float, float] = (-2.0 * np.pi, 2.0 * np.pi)

    def axes(self) -> Tuple[GridAxis, ...]:
        return (GridAxis(*self.x_range, self.counts[0]),
                GridAxis(*self.y_range, self.counts[1]),
                GridAxis(*self.theta_range, self.counts[2]))


@dataclass
class SingularObstacles:
    field: GridField          # sigma_min on the base grid
    frame: PointCloud         # unit-cube map of the base grid
    mesh: TriangleMesh        # obstacle boundaries in unit-cube coordinates
    samples: List[SingularitySample]
    threshold: float

    @property
    def cell(self) -> float:
        """Largest base-grid cell edge in unit-cube units."""
        return float(self.field.cell_size.max())


def map_singular_set(rig: MagneticRig, cfg: SingularMapConfig = SingularMapConfig()) -> SingularObstacles:
    model = rig.model()
    field_ = sigma_min_field(model, cfg.axes(), names=("x", "y", "theta"), batch_phi=rig.batch_phi)
    samples = sample_singular_set(model, cfg.axes(), cfg.threshold, field=field_)
    meshed = field_
    period = 2.0 * np.pi
    if np.isclose(cfg.theta_range[1] - cfg.theta_range[0], period) and cfg.theta_cover != tuple(cfg.theta_range):
        meshed = periodic_extend(field_, 2, period, *cfg.theta_cover)
    mesh = extract_boundary_mesh(meshed, cfg.threshold, frame=field_.scale)
    return SingularObstacles(field_, field_.scale, mesh, samples, cfg.threshold)


# ---------------------------------------------------------------------------
# reference paths


@dataclass(frozen=True)
class PosePath:
    """Piecewise-linear (x, y) path at constant speed with a fixed reference heading."""

    waypoints: Tuple[Tuple[float, float], ...]
    speed: float
    theta_ref: float = 0.0
    hold_start: float = 0.5
    hold_end: float = 2.0

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise ConfigurationError("path needs at least two waypoints")
        if not self.speed > 0:
            raise ConfigurationError("path speed must be positive")

    def _knots(self):
        pts = np.asarray(self.waypoints, dtype=float)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        t = self.hold_start + np.concatenate([[0.0], np.cumsum(seg / self.speed)])
        return pts, t

    @property
    def duration(self) -> float:
        return float(self._knots()[1][-1] + self.hold_end)

    def __call__(self, t: float):
        pts, knots = self._knots()
        if t <= knots[0] or t >= knots[-1]:
            p = pts[0] if t <= knots[0] else pts[-1]
            return np.array([p[0], p[1], self.theta_ref]), np.zeros(3)
        k = int(np.searchsorted(knots, t, side="right")) - 1
        frac = (t - knots[k]) / (knots[k + 1] - knots[k])
        p = pts[k] + frac * (pts[k + 1] - pts[k])
        v = (pts[k + 1] - pts[k]) / (knots[k + 1] - knots[k])
        return np.array([p[0], p[1], self.theta_ref]), np.array([v[0], v[1], 0.0])


@dataclass(frozen=True)
class CirclePath:
    radius: float = 8.0
    period: float = 20.0
    theta_ref: float = 0.6
    turns: float = 1.0

    @property
    def duration(self) -> float:
        return self.period * self.turns

    def __call__(self, t: float):
        w = 2.0 * np.pi / self.period
        pose = np.array([self.radius * np.cos(w * t), self.radius * np.sin(w * t), self.theta_ref])
        rate = np.array([-self.radius * w * np.sin(w * t), self.radius * w * np.cos(w * t), 0.0])
        return pose, rate


def stitch_path(n_stitches: int = 3, incision_length: float = 10.0, bite: float = 5.0,
                speed: float = 3.0, theta_ref: float = 0.15) -> PosePath:
    """Running stitch over an incision on the x axis.

    The reference alternates sides (y = -bite, +bite, ...) and crosses y = 0
    once per stitch, at x values evenly spread over the incision.
    """
    if n_stitches < 1:
        raise ConfigurationError("need at least one stitch")
    pitch = incision_length / max(n_stitches - 1, 1)
    x0 = -incision_length / 2.0 - pitch / 2.0 if n_stitches > 1 else -pitch / 2.0
    wps = [(x0 + k * pitch, bite * (-1.0) ** (k + 1)) for k in range(n_stitches + 1)]
    return PosePath(tuple((float(x), float(y)) for x, y in wps), speed, theta_ref)


# ---------------------------------------------------------------------------
# closed loop


@dataclass(frozen=True)
class SutureConfig:
    W: Tuple[float, float, float] = (100.0, 100.0, 1.0)
    gamma_reg: float = 1e-6
    K_track: Tuple[float, float, float] = (4.0, 4.0, 2.0)
    # h is in unit-cube units (~1e-3 near the obstacles), hence the large gain
    alpha: ClassKFunction = ClassKFunction("quadratic", 1000.0)
    delta: Optional[float] = None   # unit-cube units; default one base-grid cell
    horizon: float = 0.2            # unit-cube units; farther components get no row
    cbf_enabled: bool = True


MAG_COLUMNS = ["t", "x", "y", "theta", "I1", "I2", "I3", "I4", "h_min", "ex", "ey", "etheta", "active_obstacle"]


def run_suturing_scenario(rig: MagneticRig, path, obstacles: Optional[SingularObstacles],
                          qp: SutureConfig = SutureConfig(), sim: Optional[SimulatorConfig] = None,
                          x0=None, on_step=None) -> TrajectoryLog:
    """Track ``path`` with the CBF-QP; ``obstacles=None`` runs the plain reference controller.

    The current bounds are enforced in either case.  ``on_step(t, diagnostics)``
    sees every filter call.
    """
    model = rig.model()
    if sim is None:
        sim = SimulatorConfig(dt=1e-3, t_end=path.duration)
    barriers = []
    delta = None
    if obstacles is not None and qp.cbf_enabled and len(obstacles.mesh.triangles):
        delta = obstacles.cell if qp.delta is None else qp.delta
        frame = obstacles.frame
        barriers.append(ObstacleBarrier(obstacles.mesh, frame.to_unit, frame.scale.copy(), delta, qp.alpha,
                                       horizon=qp.horizon))
    cost = CostSpec(W=np.diag(qp.W), Gamma=qp.gamma_reg * np.eye(model.m))
    X = np.asarray(path(0.0)[0] if x0 is None else x0, dtype=float)
    u_prev = np.zeros(model.m)
    rows, events = [], []
    times = sim.times()
    for k, t in enumerate(times):
        pose_ref, rate = path(t)
        u_ref = reference_current_controller(rig, X, pose_ref, rate, qp.K_track)
        h_min, active_obstacle = np.nan, -1
        try:
            u, diag = safety_filter(model, X, u_ref, barriers, cost)
            if on_step is not None:
                on_step(t, diag)
            if len(diag.h):
                h_min = float(diag.h.min())
                hits = [i for i in diag.active if i < len(diag.h)]
                if hits:
                    active_obstacle = int(diag.labels[hits[0]].split("_")[-1])
        except QPInfeasible as exc:
            events.append(f"t={t:.6f}: QP infeasible, holding previous input")
            log.warning("suture: QP infeasible at t=%.4f; holding previous input", t)
            u = u_prev
            if exc.solution is not None and len(exc.solution.h):
                h_min = float(exc.solution.h.min())
        e = X - pose_ref
        e[2] = wrap_angle(e[2])
        rows.append([t, X[0], X[1], X[2], *u, h_min, e[0], e[1], e[2], active_obstacle])
        if k < len(times) - 1:
            X = step(model, X, u, sim)
        u_prev = u
    meta = {"scenario": "magnetic", "cbf": bool(barriers), "delta": delta, "n_inputs": model.m,
            "theta_ref": float(path(0.0)[0][2]), "position_unit": "mm"}
    return TrajectoryLog(list(MAG_COLUMNS), np.array(rows), meta=meta, events=events)
