"""Control-affine system models and fixed-step simulation.

A model is ``xdot = f(x) + g(x) u`` with task output ``z = gamma(x)`` and task
Jacobian ``J(x) = d gamma / dx``.  The input-to-task-rate map ``phi = J g`` is what
singularity analysis looks at.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ContractViolation, IntegrationBlowup

ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SystemModel:
    n: int
    m: int
    d: int
    drift: ArrayFn
    input_matrix: ArrayFn
    task_map: ArrayFn
    task_jacobian: ArrayFn
    name: str = "model"
    # Optional closed form: (x, index) -> gradient of the index-th smallest Gram eigenvalue.
    eigenvalue_gradient: Optional[Callable[[np.ndarray, int], np.ndarray]] = None
    input_lower: Optional[np.ndarray] = None
    input_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("n", "m", "d"):
            if int(getattr(self, name)) <= 0:
                raise ContractViolation(f"{name} must be a positive integer")

    def check_state(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ContractViolation(f"{self.name}: state has shape {x.shape}, expected ({self.n},)")
        if not np.all(np.isfinite(x)):
            raise ContractViolation(f"{self.name}: state is not finite: {x}")
        return x

    def check_input(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.m,):
            raise ContractViolation(f"{self.name}: input has shape {u.shape}, expected ({self.m},)")
        if not np.all(np.isfinite(u)):
            raise ContractViolation(f"{self.name}: input is not finite: {u}")
        return u

    @property
    def has_bounds(self) -> bool:
        return self.input_lower is not None or self.input_upper is not None

    def saturate(self, u: np.ndarray) -> np.ndarray:
        lo = -np.inf if self.input_lower is None else self.input_lower
        hi = np.inf if self.input_upper is None else self.input_upper
        return np.clip(u, lo, hi)


@dataclass(frozen=True)
class SimulatorConfig:
    dt: float = 1e-3
    t_end: float = 10.0
    integrator: str = "rk4"

    def __post_init__(self):
        if not self.dt > 0:
            raise ContractViolation("dt must be positive")
        if self.t_end < self.dt:
            raise ContractViolation("t_end must be at least dt")
        if self.integrator.lower() not in ("euler", "rk4"):
            raise ContractViolation(f"unknown integrator {self.integrator!r}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt


def mapping_matrix(model: SystemModel, x) -> np.ndarray:
    """Return ``phi(x) = J(x) g(x)``, shape (d, m)."""
    x = model.check_state(x)
    J = np.asarray(model.task_jacobian(x), dtype=float)
    g = np.asarray(model.input_matrix(x), dtype=float)
    if J.shape != (model.d, model.n) or g.shape != (model.n, model.m):
        raise ContractViolation(
            f"{model.name}: J has shape {J.shape}, g has shape {g.shape}; "
            f"expected ({model.d}, {model.n}) and ({model.n}, {model.m})"
        )
    return J @ g


def task_velocity(model: SystemModel, x, u) -> np.ndarray:
    x = model.check_state(x)
    u = model.check_input(u)
    J = np.asarray(model.task_jacobian(x), dtype=float)
    return J @ np.asarray(model.drift(x), dtype=float) + mapping_matrix(model, x) @ u


def _xdot(model: SystemModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.asarray(model.drift(x), dtype=float) + np.asarray(model.input_matrix(x), dtype=float) @ u


def step(model: SystemModel, x, u, cfg: SimulatorConfig) -> np.ndarray:
    """Advance one step of length ``cfg.dt`` with ``u`` held constant."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    dt = cfg.dt
    if cfg.integrator.lower() == "euler":
        x_next = x + dt * _xdot(model, x, u)
    else:
        k1 = _xdot(model, x, u)
        k2 = _xdot(model, x + 0.5 * dt * k1, u)
        k3 = _xdot(model, x + 0.5 * dt * k2, u)
        k4 = _xdot(model, x + dt * k3, u)
        x_next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise IntegrationBlowup(f"{model.name}: non-finite state after step from {x}", state=x_next)
    return x_next


def finite_difference_jacobian(fn: ArrayFn, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of a vector function; used as a test oracle and FD fallback."""
    x = np.asarray(x, dtype=float)
    f0 = np.atleast_1d(np.asarray(fn(x), dtype=float))
    out = np.empty((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        out[:, j] = (np.atleast_1d(fn(x + e)) - np.atleast_1d(fn(x - e))) / (2.0 * h)
    return out
