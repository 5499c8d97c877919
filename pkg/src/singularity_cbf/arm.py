"""Two-link planar arm with a barrier on the smallest eigenvalue of J J^T."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .cbf import ClassKFunction, CostSpec, EigenvalueBarrier, safety_filter
from .dynamics import SimulatorConfig, SystemModel, step
from .errors import ConfigurationError, QPInfeasible, UnsupportedParameters
from .singularity import GradientSpec, gram_eigenvalues, pinv
from .trajectory import TrajectoryLog

log = logging.getLogger(__name__)

PINV_TOL = 1e-10


@dataclass(frozen=True)
class ArmParameters:
    l1: float = 1.0
    l2: float = 1.0
    Kp: float = 2.0
    epsilon: float = 0.1

    def __post_init__(self):
        for name in ("l1", "l2", "Kp", "epsilon"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")

    @property
    def unit_links(self) -> bool:
        return self.l1 == 1.0 and self.l2 == 1.0


def forward_kinematics(p: ArmParameters, q) -> np.ndarray:
    q1, q2 = q
    return np.array([
        p.l1 * np.cos(q1) + p.l2 * np.cos(q1 + q2),
        p.l1 * np.sin(q1) + p.l2 * np.sin(q1 + q2),
    ])


def jacobian(p: ArmParameters, q) -> np.ndarray:
    q1, q2 = q
    s1, c1 = np.sin(q1), np.cos(q1)
    s12, c12 = np.sin(q1 + q2), np.cos(q1 + q2)
    return np.array([
        [-p.l1 * s1 - p.l2 * s12, -p.l2 * s12],
        [p.l1 * c1 + p.l2 * c12, p.l2 * c12],
    ])


def _radicand(c):
    return 12.0 * c + 8.0 * c * c + 5.0


def analytic_eigenvalues(q2, p: Optional[ArmParameters] = None):
    """Closed-form eigenvalues (lambda1 <= lambda2) of J J^T for unit links."""
    if p is not None and not p.unit_links:
        raise UnsupportedParameters("closed-form eigenvalues assume l1 = l2 = 1")
    c = np.cos(q2)
    root = np.sqrt(_radicand(c))
    return c - 0.5 * root + 1.5, c + 0.5 * root + 1.5


def analytic_lambda1_gradient(q2, p: Optional[ArmParameters] = None):
    """d lambda1 / d q2 for unit links."""
    if p is not None and not p.unit_links:
        raise UnsupportedParameters("closed-form gradient assumes l1 = l2 = 1")
    s, c = np.sin(q2), np.cos(q2)
    return -s + (12.0 * s + 16.0 * c * s) / (4.0 * np.sqrt(_radicand(c)))


def analytic_lambda2_gradient(q2):
    s, c = np.sin(q2), np.cos(q2)
    return -s - (12.0 * s + 16.0 * c * s) / (4.0 * np.sqrt(_radicand(c)))


def _analytic_gradient(x, index):
    g = analytic_lambda1_gradient(x[1]) if index == 0 else analytic_lambda2_gradient(x[1])
    return np.array([0.0, g])


def arm_model(p: ArmParameters = ArmParameters()) -> SystemModel:
    """Kinematic arm: qdot = u, z = forward kinematics."""
    return SystemModel(
        n=2, m=2, d=2,
        drift=lambda q: np.zeros(2),
        input_matrix=lambda q: np.eye(2),
        task_map=lambda q: forward_kinematics(p, q),
        task_jacobian=lambda q: jacobian(p, q),
        name="planar-arm",
        eigenvalue_gradient=_analytic_gradient if p.unit_links else None,
    )


def reference_controller(p: ArmParameters, q, z_d) -> np.ndarray:
    """Proportional task-space law mapped to joint rates with a truncated pseudoinverse."""
    zdot = p.Kp * (np.asarray(z_d, dtype=float) - forward_kinematics(p, q))
    return pinv(jacobian(p, q), PINV_TOL) @ zdot


@dataclass(frozen=True)
class ArmScenario:
    waypoints: Sequence[Sequence[float]] = ((np.sqrt(2.0), np.sqrt(2.0)), (0.5, 1.2))
    switch_times: Sequence[float] = (5.0,)
    cbf_enabled: bool = True
    q0: Sequence[float] = (np.pi / 4, np.pi / 2)
    alpha: ClassKFunction = ClassKFunction("linear", 1.0)
    gradient: str = "analytic"

    def validate(self, p: ArmParameters):
        if len(self.switch_times) != len(self.waypoints) - 1:
            raise ConfigurationError("need one switch time between consecutive waypoints")
        if list(self.switch_times) != sorted(self.switch_times):
            raise ConfigurationError("switch_times must be increasing")
        inner, outer = abs(p.l1 - p.l2), p.l1 + p.l2
        for wp in self.waypoints:
            r = float(np.hypot(*wp))
            # closed annulus: the default first target sits exactly on the outer rim
            if not inner - 1e-12 <= r <= outer + 1e-12:
                raise ConfigurationError(f"waypoint {tuple(wp)} outside reachable annulus [{inner}, {outer}]")

    def target(self, t: float) -> np.ndarray:
        k = int(np.searchsorted(np.asarray(self.switch_times, dtype=float), t, side="right"))
        return np.asarray(self.waypoints[k], dtype=float)


ARM_COLUMNS = ["t", "q1", "q2", "u1", "u2", "lambda1", "h", "ex", "ey", "active"]


def run_arm_scenario(p: ArmParameters, scenario: ArmScenario, cfg: SimulatorConfig = SimulatorConfig(t_end=10.0),
                     on_step=None) -> TrajectoryLog:
    """Simulate the two-task arm run; ``on_step(t, diagnostics)`` sees every filter call."""
    scenario.validate(p)
    model = arm_model(p)
    mode = scenario.gradient if (scenario.gradient == "fd" or p.unit_links) else "fd"
    barrier = EigenvalueBarrier(0, p.epsilon, scenario.alpha, GradientSpec(mode))
    cost = CostSpec(W=np.eye(2))
    q = np.asarray(scenario.q0, dtype=float)
    u_prev = np.zeros(2)
    rows = []
    events: List[str] = []
    times = cfg.times()
    for k, t in enumerate(times):
        z_d = scenario.target(t)
        u_ref = reference_controller(p, q, z_d)
        active, diag = 0, None
        if scenario.cbf_enabled:
            try:
                u, diag = safety_filter(model, q, u_ref, [barrier], cost)
                active = int(len(diag.active) > 0)
                if on_step is not None:
                    on_step(t, diag)
            except QPInfeasible:
                events.append(f"t={t:.6f}: QP infeasible, holding previous input")
                log.warning("arm: QP infeasible at t=%.4f; holding previous input", t)
                u = u_prev
        else:
            u = u_ref
        # the filter already evaluated h = lambda1 - epsilon at this state
        lam1 = diag.h[0] + p.epsilon if diag is not None else gram_eigenvalues(model, q)[0]
        e = forward_kinematics(p, q) - z_d
        rows.append([t, q[0], q[1], u[0], u[1], lam1, lam1 - p.epsilon, e[0], e[1], active])
        if k < len(times) - 1:
            q = step(model, q, u, cfg)
        u_prev = u
    meta = {"scenario": "arm", "cbf": scenario.cbf_enabled, "epsilon": p.epsilon, "n_inputs": 2,
            "position_unit": "m"}
    return TrajectoryLog(list(ARM_COLUMNS), np.array(rows), meta=meta, events=events)
