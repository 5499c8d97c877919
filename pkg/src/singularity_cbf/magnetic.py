"""Planar magnetic actuation: four dipole coils steering a magnetic agent.

State is ``(x, y, theta)`` with x, y in millimetres and theta in radians; the
inputs are the four coil currents in amperes.  Fields and forces are computed
in SI units and the actuation matrix is reported in mm/s and rad/s per ampere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dynamics import SystemModel
from .errors import ConfigurationError, ContractViolation
from .singularity import pinv
from .trajectory import wrap_angle

MU0_OVER_4PI = 1e-7
MM = 1e-3
MIN_SOURCE_DISTANCE = 1e-9


@dataclass(frozen=True)
class CoilConfig:
    """Coil dipole positions (m) and per-ampere moments (A m^2 / A)."""

    positions: np.ndarray
    moments: np.ndarray
    mu0_over_4pi: float = MU0_OVER_4PI

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 2)
        mom = np.asarray(self.moments, dtype=float).reshape(-1, 2)
        if len(pos) != len(mom):
            raise ConfigurationError("need one moment per coil")
        if np.any(np.linalg.norm(mom, axis=1) <= 0):
            raise ConfigurationError("coil moments must be nonzero")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "moments", mom)

    @property
    def n_coils(self) -> int:
        return len(self.positions)

    @classmethod
    def ring(cls, n: int = 4, radius: float = 0.04, moment: float = 1.0, phase: float = 0.0) -> "CoilConfig":
        """``n`` coils evenly spaced on a circle, moments pointing at the centre."""
        ang = phase + 2.0 * np.pi * np.arange(n) / n
        direction = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return cls(positions=radius * direction, moments=-moment * direction)


@dataclass(frozen=True)
class AgentParams:
    m0: float = 1e-3     # agent dipole moment, A m^2
    c_t: float = 0.05    # translational friction, N s/m
    c_r: float = 2.5e-6  # rotational friction, N m s/rad

    def __post_init__(self):
        for name in ("m0", "c_t", "c_r"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")


def _check_distance(r):
    if np.any(np.linalg.norm(r, axis=-1) <= MIN_SOURCE_DISTANCE):
        raise ContractViolation("field query point coincides with a dipole source")


def dipole_field_3d(source_pos, source_moment, query_pos, k: float = MU0_OVER_4PI) -> np.ndarray:
    """Full 3D point-dipole field ``k (3 (m.r^) r^ - m) / |r|^3``; broadcasts over leading axes."""
    r = np.asarray(query_pos, dtype=float) - np.asarray(source_pos, dtype=float)
    _check_distance(r)
    m = np.asarray(source_moment, dtype=float)
    dist = np.linalg.norm(r, axis=-1, keepdims=True)
    rhat = r / dist
    mr = np.sum(m * rhat, axis=-1, keepdims=True)
    return k * (3.0 * mr * rhat - m) / dist ** 3


def dipole_gradient_3d(source_pos, source_moment, query_pos, k: float = MU0_OVER_4PI) -> np.ndarray:
    """Spatial Jacobian ``dB_i / dr_j`` of the point-dipole field (symmetric, traceless)."""
    r = np.asarray(query_pos, dtype=float) - np.asarray(source_pos, dtype=float)
    _check_distance(r)
    m = np.broadcast_to(np.asarray(source_moment, dtype=float), r.shape)
    dist2 = np.sum(r * r, axis=-1)[..., None, None]
    mr = np.sum(m * r, axis=-1)[..., None, None]
    eye = np.eye(r.shape[-1])
    rr = r[..., :, None] * r[..., None, :]
    mr_outer = m[..., :, None] * r[..., None, :]
    return k * (3.0 * (mr_outer + np.swapaxes(mr_outer, -1, -2) + mr * eye) / dist2 ** 2.5
                - 15.0 * mr * rr / dist2 ** 3.5)


def dipole_field(source_pos, source_moment, query_pos, k: float = MU0_OVER_4PI) -> np.ndarray:
    """In-plane field (T) of a planar dipole at planar query points."""
    return dipole_field_3d(source_pos, source_moment, query_pos, k)


def field_gradient(source_pos, source_moment, query_pos, k: float = MU0_OVER_4PI) -> np.ndarray:
    """In-plane 2x2 block of the field Jacobian (T/m)."""
    return dipole_gradient_3d(source_pos, source_moment, query_pos, k)


def agent_moment(theta, params: AgentParams) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    return params.m0 * np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def unit_wrench(cfg: CoilConfig, coil: int, position, theta, params: AgentParams):
    """Force (N, 2-vector) and torque (N m) on the agent per ampere in ``coil``.

    ``position`` is in metres.  Broadcasts over leading axes of position/theta.
    """
    pos = np.asarray(position, dtype=float)
    m = agent_moment(theta, params)
    B = dipole_field(cfg.positions[coil], cfg.moments[coil], pos, cfg.mu0_over_4pi)
    G = field_gradient(cfg.positions[coil], cfg.moments[coil], pos, cfg.mu0_over_4pi)
    F = np.einsum("...ij,...j->...i", G, m)
    tau = m[..., 0] * B[..., 1] - m[..., 1] * B[..., 0]
    return F, tau


def actuation_matrix(cfg: CoilConfig, state, params: AgentParams) -> np.ndarray:
    """3 x n_coils map from currents to (xdot [mm/s], ydot [mm/s], thetadot [rad/s]).

    ``state`` may be a single (x_mm, y_mm, theta) or a stack (..., 3).
    """
    state = np.asarray(state, dtype=float)
    if state.ndim == 1:
        return _actuation_single(cfg, state, params)
    pos = (state[..., :2] * MM)[..., None, :]          # (..., 1, 2) against (n_coils, 2)
    m = agent_moment(state[..., 2], params)[..., None, :]
    B = dipole_field(cfg.positions, cfg.moments, pos, cfg.mu0_over_4pi)
    G = field_gradient(cfg.positions, cfg.moments, pos, cfg.mu0_over_4pi)
    F = np.einsum("...ij,...j->...i", G, m)
    tau = m[..., 0] * B[..., 1] - m[..., 1] * B[..., 0]
    rows = np.concatenate([F / (params.c_t * MM), (tau / params.c_r)[..., None]], axis=-1)
    return np.swapaxes(rows, -1, -2)


def _actuation_single(cfg, state, params):
    # scalar version of the batched path; the closed loop calls this every stage
    x, y = float(state[0]) * MM, float(state[1]) * MM
    mx, my = params.m0 * math.cos(state[2]), params.m0 * math.sin(state[2])
    k = cfg.mu0_over_4pi
    out = np.empty((3, cfg.n_coils))
    for i, ((sx, sy), (cx, cy)) in enumerate(zip(cfg.positions.tolist(), cfg.moments.tolist())):
        rx, ry = x - sx, y - sy
        d2 = rx * rx + ry * ry
        if d2 <= MIN_SOURCE_DISTANCE ** 2:
            raise ContractViolation("field query point coincides with a dipole source")
        inv5 = k / (d2 * d2 * math.sqrt(d2))
        cr = cx * rx + cy * ry
        bx = 3.0 * cr * rx * inv5 - cx * d2 * inv5
        by = 3.0 * cr * ry * inv5 - cy * d2 * inv5
        q = 15.0 * cr * inv5 / d2
        gxx = 3.0 * inv5 * (2.0 * cx * rx + cr) - q * rx * rx
        gyy = 3.0 * inv5 * (2.0 * cy * ry + cr) - q * ry * ry
        gxy = 3.0 * inv5 * (cx * ry + cy * rx) - q * rx * ry
        out[0, i] = (gxx * mx + gxy * my) / (params.c_t * MM)
        out[1, i] = (gxy * mx + gyy * my) / (params.c_t * MM)
        out[2, i] = (mx * by - my * bx) / params.c_r
    return out


@dataclass(frozen=True)
class MagneticRig:
    coils: CoilConfig = field(default_factory=CoilConfig.ring)
    agent: AgentParams = AgentParams()
    workspace_radius_mm: float = 17.5
    current_limit: float = 4.0

    def model(self) -> SystemModel:
        lim = np.full(self.coils.n_coils, self.current_limit)
        return SystemModel(
            n=3, m=self.coils.n_coils, d=3,
            drift=lambda X: np.zeros(3),
            input_matrix=lambda X: actuation_matrix(self.coils, X, self.agent),
            task_map=lambda X: np.asarray(X, dtype=float),
            task_jacobian=lambda X: np.eye(3),
            name="magnetic-rig",
            input_lower=-lim if np.isfinite(self.current_limit) else None,
            input_upper=lim if np.isfinite(self.current_limit) else None,
        )

    def batch_phi(self, states) -> np.ndarray:
        return actuation_matrix(self.coils, states, self.agent)

    def inside_workspace(self, state) -> bool:
        return float(np.hypot(state[0], state[1])) <= self.workspace_radius_mm


def reference_current_controller(rig: MagneticRig, state, pose_ref, pose_ref_rate, K_track) -> np.ndarray:
    """Minimum-norm currents realising a feedforward-plus-proportional pose rate."""
    state = np.asarray(state, dtype=float)
    err = np.asarray(pose_ref, dtype=float) - state
    err[2] = wrap_angle(err[2])
    xdot_des = np.asarray(pose_ref_rate, dtype=float) + np.asarray(K_track, dtype=float) * err
    g = actuation_matrix(rig.coils, state, rig.agent)
    return pinv(g, 1e-10) @ xdot_des
