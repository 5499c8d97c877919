"""Dense active-set solver for the small QPs behind the safety filter.

    minimize   1/2 (u - u_ref)^T Q (u - u_ref)
    subject to A u >= b,  lower <= u <= upper

The method is the dual active-set scheme of Goldfarb and Idnani: start at the
unconstrained minimizer ``u_ref``, add the most violated constraint, take
primal/dual steps, and drop constraints whose multipliers would turn negative.
Every iterate is optimal for the constraints in its active set, so the first
primal-feasible iterate is the solution, and an inconsistent constraint set is
detected when no step can reduce the violation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ContractViolation, SingularCost

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QPProblem:
    Q: np.ndarray
    u_ref: np.ndarray
    A: np.ndarray = None
    b: np.ndarray = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        u_ref = np.asarray(self.u_ref, dtype=float).reshape(-1)
        m = len(u_ref)
        if Q.shape != (m, m):
            raise ContractViolation(f"Q has shape {Q.shape}, expected ({m}, {m})")
        A = np.zeros((0, m)) if self.A is None else np.asarray(self.A, dtype=float).reshape(-1, m)
        b = np.zeros(0) if self.b is None else np.asarray(self.b, dtype=float).reshape(-1)
        if len(A) != len(b):
            raise ContractViolation("A and b have different row counts")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "u_ref", u_ref)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        for name in ("lower", "upper"):
            v = getattr(self, name)
            if v is not None:
                object.__setattr__(self, name, np.broadcast_to(np.asarray(v, dtype=float), (m,)).copy())

    @property
    def m(self) -> int:
        return len(self.u_ref)

    def all_rows(self) -> Tuple[np.ndarray, np.ndarray]:
        """Barrier rows followed by finite box-bound rows, all as ``a^T u >= b``."""
        rows, rhs = [self.A], [self.b]
        eye = np.eye(self.m)
        if self.lower is not None:
            keep = np.isfinite(self.lower)
            rows.append(eye[keep])
            rhs.append(self.lower[keep])
        if self.upper is not None:
            keep = np.isfinite(self.upper)
            rows.append(-eye[keep])
            rhs.append(-self.upper[keep])
        return np.vstack(rows), np.concatenate(rhs)

    def objective(self, u) -> float:
        e = np.asarray(u, dtype=float) - self.u_ref
        return 0.5 * float(e @ self.Q @ e)


@dataclass(frozen=True)
class QPSolution:
    u: np.ndarray
    active_set: Tuple[int, ...]
    multipliers: np.ndarray
    status: str
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def kkt_residuals(self, problem: QPProblem) -> dict:
        A, b = problem.all_rows()
        lam = np.zeros(len(b))
        lam[list(self.active_set)] = self.multipliers
        slack = A @ self.u - b
        return {
            "stationarity": float(np.linalg.norm(problem.Q @ (self.u - problem.u_ref) - A.T @ lam)),
            "primal": float(max(0.0, -slack.min())) if len(b) else 0.0,
            "dual": float(max(0.0, -lam.min())) if len(b) else 0.0,
            "complementarity": float(np.abs(lam * slack).max()) if len(b) else 0.0,
        }


def _cholesky_inverse(Q: np.ndarray) -> np.ndarray:
    if np.abs(Q - Q.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(Q).max(initial=0.0)):
        raise ContractViolation("Q must be symmetric")
    try:
        L = np.linalg.cholesky(Q)
    except np.linalg.LinAlgError as exc:
        raise SingularCost("Q is not positive definite") from exc
    Linv = np.linalg.inv(L)
    return Linv.T @ Linv


def solve_qp(problem: QPProblem, max_iter: Optional[int] = None) -> QPSolution:
    A, b = problem.all_rows()
    Ginv = _cholesky_inverse(problem.Q)
    p_total = len(b)
    x = problem.u_ref.copy()
    active: list = []
    mu = np.zeros(0)
    row_norm = np.linalg.norm(A, axis=1) if p_total else np.zeros(0)
    max_iter = max_iter or 20 * (p_total + problem.m) + 50
    it = 0

    while True:
        if p_total == 0:
            break
        slack = A @ x - b
        tol = 1e-12 * np.maximum(1.0, np.maximum(np.abs(b), row_norm * np.linalg.norm(x)))
        violated = slack < -tol
        if active:
            violated[active] = False
        if not np.any(violated):
            break
        cand = np.flatnonzero(violated)
        p = int(cand[np.argmin(slack[cand])])  # argmin picks the lowest index on ties
        n_p = A[p]
        mu_plus = np.append(mu, 0.0)

        while True:
            it += 1
            if it > max_iter:
                raise RuntimeError("active-set iteration limit reached")
            q = len(active)
            Gn = Ginv @ n_p
            if q:
                N = A[active].T
                GN = Ginv @ N
                Nstar = np.linalg.solve(N.T @ GN, GN.T)
                r = Nstar @ n_p
                z = Gn - GN @ r
            else:
                r = np.zeros(0)
                z = Gn
            # partial (dual) step: largest step keeping active multipliers >= 0
            t1, k = np.inf, -1
            for j in range(q):
                if r[j] > 1e-14:
                    tj = mu_plus[j] / r[j]
                    if tj < t1 or (tj == t1 and active[j] < active[k]):
                        t1, k = tj, j
            zn = float(z @ n_p)
            if np.linalg.norm(z) <= 1e-12 * max(np.linalg.norm(Gn), 1e-300) or zn <= 0.0:
                t2 = np.inf
            else:
                t2 = -(float(n_p @ x) - b[p]) / zn
            if not np.isfinite(t1) and not np.isfinite(t2):
                return QPSolution(x, tuple(sorted(active)), _ordered(mu_plus[:q], active), INFEASIBLE, it)
            if not np.isfinite(t2):
                mu_plus[:q] -= t1 * r
                mu_plus[q] += t1
                mu_plus = np.delete(mu_plus, k)
                del active[k]
                continue
            t = min(t1, t2)
            x = x + t * z
            mu_plus[:q] -= t * r
            mu_plus[q] += t
            if t2 <= t1:
                active.append(p)
                mu = mu_plus
                break
            mu_plus = np.delete(mu_plus, k)
            del active[k]

    return QPSolution(x, tuple(sorted(active)), _ordered(mu, active), OPTIMAL, it)


def _ordered(mu: np.ndarray, active: list) -> np.ndarray:
    if not active:
        return np.zeros(0)
    order = np.argsort(active)
    return np.maximum(np.asarray(mu)[order], 0.0)
