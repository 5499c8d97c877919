"""Barrier constraints, task-space weighted cost, and the CBF-QP safety filter."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .dynamics import SystemModel, mapping_matrix
from .errors import ConfigurationError, ContractViolation, QPInfeasible, SingularCost
from .geometry import MeshIndex, TriangleMesh, distance_barrier_value_and_gradient
from .qp import QPProblem, QPSolution, solve_qp
from .singularity import GradientSpec, eigenvalue_gradient, gram_eigenvalues

log = logging.getLogger(__name__)

COST_EIG_FLOOR = 1e-12
CLIP_TOL = 1e-9   # clipping below this is solver round-off


@dataclass(frozen=True)
class ClassKFunction:
    """Extended class-K function; ``kind`` is "linear" or "quadratic"."""

    kind: str = "linear"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("linear", "quadratic"):
            raise ConfigurationError(f"unknown class-K kind {self.kind!r}")
        if not self.gamma > 0:
            raise ConfigurationError("class-K gain gamma must be positive")

    def __call__(self, h):
        return class_k_eval(self, h)


def class_k_eval(alpha: ClassKFunction, h):
    # quadratic kind uses the signed square so it stays increasing for h < 0
    if alpha.kind == "linear":
        return alpha.gamma * h
    return alpha.gamma * h * np.abs(h)


@dataclass(frozen=True)
class BarrierConstraint:
    """One affine row ``a^T u >= b`` from a barrier with value ``h_value``."""

    a: np.ndarray
    b: float
    h_value: float
    label: str = ""

    def satisfied_by(self, u, tol: float = 0.0) -> bool:
        return float(self.a @ np.asarray(u, dtype=float)) >= self.b - tol


def assemble_eigenvalue_barrier(model: SystemModel, x, index: int, epsilon: float,
                                alpha: ClassKFunction, grad_spec: GradientSpec = GradientSpec(),
                                label: Optional[str] = None) -> BarrierConstraint:
    """Row for ``h = lambda_index(x) - epsilon`` (index 0 is the smallest eigenvalue)."""
    x = model.check_state(x)
    spectrum = gram_eigenvalues(model, x)
    lam = spectrum[index]
    grad = eigenvalue_gradient(model, x, index, grad_spec, eigenvalues=spectrum)
    h = float(lam - epsilon)
    a = grad @ np.asarray(model.input_matrix(x), dtype=float)
    b = -float(grad @ np.asarray(model.drift(x), dtype=float)) - float(class_k_eval(alpha, h))
    return BarrierConstraint(a, b, h, label or f"lambda{index + 1}")


def assemble_distance_barrier(X, p_O, delta: float, alpha: ClassKFunction, phi,
                              scale=None, label: str = "obstacle") -> BarrierConstraint:
    """Row for ``h = (|X - p_O|^2 - delta^2) / 2`` with ``p_O`` frozen.

    ``X`` and ``p_O`` share one coordinate frame.  When that frame is a per-axis
    scaling of the task output, ``scale`` holds d(frame)/d(task) so the row is
    expressed in task rates: ``a = (scale * (X - p_O))^T phi``.
    """
    X = np.asarray(X, dtype=float)
    diff = X - np.asarray(p_O, dtype=float)
    h = 0.5 * (float(diff @ diff) - delta * delta)
    grad = diff if scale is None else np.asarray(scale, dtype=float) * diff
    a = grad @ np.asarray(phi, dtype=float)
    return BarrierConstraint(a, -float(class_k_eval(alpha, h)), h, label)


def build_cost(phi, W, Gamma=None) -> np.ndarray:
    """Task-space weighted QP Hessian ``phi^T W phi`` (+ ``Gamma`` when over-actuated)."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    d, m = phi.shape
    W = np.asarray(W, dtype=float)
    if W.shape != (d, d):
        raise ContractViolation(f"W must be {d}x{d}")
    Q = phi.T @ W @ phi
    if d < m:
        if Gamma is None:
            raise ConfigurationError("over-actuated map (d < m) needs a regularization Gamma")
        Q = Q + np.asarray(Gamma, dtype=float)
    Q = 0.5 * (Q + Q.T)
    lam_min = np.linalg.eigvalsh(Q)[0]
    if lam_min <= COST_EIG_FLOOR:
        raise SingularCost(f"QP cost has smallest eigenvalue {lam_min:.3g}")
    return Q


# ---------------------------------------------------------------------------
# barrier specs consumed by the safety filter


@dataclass(frozen=True)
class EigenvalueBarrier:
    index: int = 0
    epsilon: float = 0.1
    alpha: ClassKFunction = ClassKFunction()
    grad_spec: GradientSpec = GradientSpec()

    def constraints(self, model: SystemModel, x) -> List[BarrierConstraint]:
        return [assemble_eigenvalue_barrier(model, x, self.index, self.epsilon, self.alpha, self.grad_spec)]


@dataclass
class ObstacleBarrier:
    """Distance barriers to the mesh components near the current task output.

    The mesh lives in unit-cube coordinates: ``to_unit`` maps a task output
    there and ``unit_scale`` is its per-axis derivative.  ``delta`` and
    ``horizon`` are in unit-cube units.  Components farther than ``horizon``
    contribute no row; one can only come within range with h > 0.
    """

    mesh: TriangleMesh
    to_unit: callable
    unit_scale: np.ndarray
    delta: float
    alpha: ClassKFunction
    horizon: float = np.inf
    cache_radius: float = 0.01
    index: MeshIndex = field(default=None, repr=False)
    last_points: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.index is None:
            self.index = MeshIndex(self.mesh, self.cache_radius)

    def constraints(self, model: SystemModel, x) -> List[BarrierConstraint]:
        s = self.to_unit(np.asarray(model.task_map(x), dtype=float))
        self.last_points = self.index.query(s, self.horizon)
        if not self.last_points:
            return []
        phi = mapping_matrix(model, x)
        diff = s - np.array([r.point for r in self.last_points])
        h = 0.5 * (np.sum(diff * diff, axis=1) - self.delta ** 2)
        A = (diff * self.unit_scale) @ phi
        b = -class_k_eval(self.alpha, h)
        return [BarrierConstraint(A[k], float(b[k]), float(h[k]), f"obstacle_{r.component_id}")
                for k, r in enumerate(self.last_points)]

    def values(self, model: SystemModel, x) -> np.ndarray:
        s = self.to_unit(np.asarray(model.task_map(x), dtype=float))
        return np.array([distance_barrier_value_and_gradient(s, r, self.delta)[0]
                         for r in self.index.query(s, self.horizon)])


@dataclass(frozen=True)
class CostSpec:
    W: np.ndarray
    Gamma: Optional[np.ndarray] = None


@dataclass
class FilterDiagnostics:
    h: np.ndarray
    labels: List[str]
    active: tuple
    u: np.ndarray
    u_ref: np.ndarray
    status: str
    solution: Optional[QPSolution] = None

    @property
    def deviation(self) -> float:
        return float(np.linalg.norm(self.u - self.u_ref))

    def to_json(self, t: float) -> dict:
        return {
            "t": float(t),
            "h": [float(v) for v in self.h],
            "active": [int(i) for i in self.active],
            "u": [float(v) for v in self.u],
            "u_ref": [float(v) for v in self.u_ref],
            "deviation": self.deviation,
        }


def safety_filter(model: SystemModel, x, u_ref, barriers: Sequence, cost: CostSpec):
    """Minimally modify ``u_ref`` so every barrier condition holds at ``x``.

    Returns ``(u, diagnostics)``.  Raises QPInfeasible (carrying the diagnostics)
    when the constraint set is inconsistent.
    """
    x = model.check_state(x)
    u_ref = model.check_input(u_ref)
    rows: List[BarrierConstraint] = []
    for spec in barriers:
        rows.extend(spec.constraints(model, x))
    h = np.array([r.h_value for r in rows])
    labels = [r.label for r in rows]
    if not rows and not model.has_bounds:
        return u_ref.copy(), FilterDiagnostics(h, labels, (), u_ref.copy(), u_ref.copy(), "optimal")

    Q = build_cost(mapping_matrix(model, x), cost.W, cost.Gamma)
    problem = QPProblem(
        Q, u_ref,
        A=np.array([r.a for r in rows]).reshape(-1, model.m),
        b=np.array([r.b for r in rows]),
        lower=model.input_lower, upper=model.input_upper,
    )
    sol = solve_qp(problem)
    diag = FilterDiagnostics(h, labels, sol.active_set, sol.u, u_ref.copy(), sol.status, sol)
    if not sol.optimal:
        raise QPInfeasible(f"{model.name}: safety QP infeasible at x={x}", solution=diag)
    u = sol.u
    if model.has_bounds:
        clipped = model.saturate(u)
        if np.max(np.abs(clipped - u)) > CLIP_TOL:
            log.warning("%s: QP output clipped to input bounds", model.name)
        u = clipped
        diag.u = u
    return u, diag
