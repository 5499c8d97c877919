"""Gram-matrix spectra of the input-to-task map and the sampled singular set."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from ._io import atomic_write_text, csv_text
from .dynamics import SystemModel, mapping_matrix
from .errors import ContractViolation, NondifferentiablePoint
from .geometry import GridField, as_axes, grid_nodes

EIGENGAP_TOL = 1e-8
PSD_SLACK = 1e-10


def gram_matrix(phi) -> np.ndarray:
    """``phi phi^T`` when the map is over-actuated (d < m), else ``phi^T phi``.

    Works on a single (d, m) matrix or a stack (..., d, m); the result is k x k
    with k = min(d, m).
    """
    phi = np.asarray(phi, dtype=float)
    if phi.ndim < 2:
        raise ContractViolation("phi must be at least 2-dimensional")
    d, m = phi.shape[-2:]
    phiT = np.swapaxes(phi, -1, -2)
    M = phi @ phiT if d < m else phiT @ phi
    return 0.5 * (M + np.swapaxes(M, -1, -2))


@dataclass(frozen=True)
class EigenSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def jacobi_eigh(M, tol: float = 1e-15, max_sweeps: int = 60):
    """Cyclic Jacobi eigen-decomposition for a stack of small symmetric matrices.

    Returns ascending eigenvalues (..., k) and matching orthonormal eigenvector
    columns (..., k, k).  Ties in the sort keep the diagonal position order.
    """
    A = np.array(M, dtype=float, copy=True)
    single = A.ndim == 2
    if single:
        return _jacobi_single(A, tol, max_sweeps)
    batch_shape = A.shape[:-2]
    k = A.shape[-1]
    A = A.reshape(-1, k, k)
    V = np.broadcast_to(np.eye(k), A.shape).copy()
    scale = np.maximum(np.abs(A).max(axis=(1, 2)), np.finfo(float).tiny)

    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.triu(A, 1) ** 2, axis=(1, 2)))
        if np.all(off <= tol * scale):
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[:, p, q]
                active = np.abs(apq) > tol * scale * 1e-3
                if not np.any(active):
                    continue
                app = A[:, p, p]
                aqq = A[:, q, q]
                safe = np.where(active, apq, 1.0)
                theta = (aqq - app) / (2.0 * safe)
                t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
                t = np.where(active, t, 0.0)
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- R^T A R with R the (p, q) plane rotation
                Ap = A[:, :, p].copy()
                Aq = A[:, :, q].copy()
                A[:, :, p] = c[:, None] * Ap - s[:, None] * Aq
                A[:, :, q] = s[:, None] * Ap + c[:, None] * Aq
                Ap = A[:, p, :].copy()
                Aq = A[:, q, :].copy()
                A[:, p, :] = c[:, None] * Ap - s[:, None] * Aq
                A[:, q, :] = s[:, None] * Ap + c[:, None] * Aq
                Vp = V[:, :, p].copy()
                Vq = V[:, :, q].copy()
                V[:, :, p] = c[:, None] * Vp - s[:, None] * Vq
                V[:, :, q] = s[:, None] * Vp + c[:, None] * Vq

    w = np.diagonal(A, axis1=1, axis2=2).copy()
    order = np.argsort(w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    V = np.take_along_axis(V, order[:, None, :], axis=2)
    w = w.reshape(batch_shape + (k,))
    V = V.reshape(batch_shape + (k, k))
    if single:
        return w[0], V[0]
    return w, V


def _jacobi_single(M: np.ndarray, tol: float, max_sweeps: int):
    # same sweep as the batched path, on Python floats (much cheaper for k <= 4)
    k = M.shape[0]
    A = M.tolist()
    V = [[1.0 if i == j else 0.0 for j in range(k)] for i in range(k)]
    scale = max(max(abs(v) for v in row) for row in A) or np.finfo(float).tiny
    for _ in range(max_sweeps):
        off = sum(A[i][j] ** 2 for i in range(k) for j in range(i + 1, k)) ** 0.5
        if off <= tol * scale:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = A[p][q]
                if abs(apq) <= tol * scale * 1e-3:
                    continue
                theta = (A[q][q] - A[p][p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + (theta * theta + 1.0) ** 0.5)
                c = 1.0 / (t * t + 1.0) ** 0.5
                s = t * c
                for r in range(k):
                    arp, arq = A[r][p], A[r][q]
                    A[r][p] = c * arp - s * arq
                    A[r][q] = s * arp + c * arq
                for r in range(k):
                    apr, aqr = A[p][r], A[q][r]
                    A[p][r] = c * apr - s * aqr
                    A[q][r] = s * apr + c * aqr
                for r in range(k):
                    vrp, vrq = V[r][p], V[r][q]
                    V[r][p] = c * vrp - s * vrq
                    V[r][q] = s * vrp + c * vrq
    w = np.array([A[i][i] for i in range(k)])
    order = np.argsort(w, kind="stable")
    return w[order], np.array(V)[:, order]


def eigen_spectrum(M) -> EigenSpectrum:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {M.shape}")
    if np.abs(M - M.T).max(initial=0.0) > 1e-12 * max(1.0, np.abs(M).max(initial=0.0)):
        raise ContractViolation("eigen_spectrum needs a symmetric matrix")
    w, V = jacobi_eigh(M)
    return EigenSpectrum(w, V)


def smallest_singular_value(phi) -> float | np.ndarray:
    """sqrt of the smallest Gram eigenvalue; accepts a stack of matrices too."""
    w, _ = jacobi_eigh(gram_matrix(phi))
    return np.sqrt(np.maximum(w[..., 0], 0.0))


def gram_eigenvalues(model: SystemModel, x) -> np.ndarray:
    w, _ = jacobi_eigh(gram_matrix(mapping_matrix(model, x)))
    return w


@dataclass(frozen=True)
class GradientSpec:
    """How to differentiate an eigenvalue: ``mode`` is "analytic" or "fd"."""

    mode: str = "fd"
    h: float = 1e-6
    fn: Optional[Callable[[np.ndarray, int], np.ndarray]] = None

    def __post_init__(self):
        if self.mode not in ("analytic", "fd"):
            raise ContractViolation(f"unknown gradient mode {self.mode!r}")
        if not self.h > 0:
            raise ContractViolation("finite-difference step must be positive")


def _check_simple(w: np.ndarray, index: int):
    gaps = [abs(w[index] - w[j]) for j in (index - 1, index + 1) if 0 <= j < len(w)]
    if gaps and min(gaps) <= EIGENGAP_TOL:
        raise NondifferentiablePoint(f"eigenvalue {index} is repeated (gap {min(gaps):.3g})")


def eigenvalue_gradient(model: SystemModel, x, index: int, spec: GradientSpec = GradientSpec(),
                        eigenvalues=None) -> np.ndarray:
    """Gradient w.r.t. the state of the ``index``-th smallest Gram eigenvalue (0-based).

    ``eigenvalues`` may pass in the spectrum at ``x`` when the caller already has it.
    """
    x = model.check_state(x)
    w = gram_eigenvalues(model, x) if eigenvalues is None else np.asarray(eigenvalues, dtype=float)
    if not 0 <= index < len(w):
        raise ContractViolation(f"eigenvalue index {index} out of range for k={len(w)}")
    _check_simple(w, index)
    if spec.mode == "analytic":
        fn = spec.fn or model.eigenvalue_gradient
        if fn is None:
            raise ContractViolation(f"{model.name} has no closed-form eigenvalue gradient")
        return np.asarray(fn(x, index), dtype=float)
    grad = np.empty(model.n)
    for j in range(model.n):
        e = np.zeros(model.n)
        e[j] = spec.h
        grad[j] = (gram_eigenvalues(model, x + e)[index] - gram_eigenvalues(model, x - e)[index]) / (2.0 * spec.h)
    return grad


@dataclass(frozen=True)
class SingularitySample:
    state: np.ndarray
    sigma_min: float


def sigma_min_field(model: SystemModel, axes, names=(), batch_phi: Optional[Callable] = None) -> GridField:
    """Evaluate the smallest singular value of phi at every grid node.

    ``batch_phi`` maps an (N, n) array of states to (N, d, m) matrices; without it
    the model is evaluated node by node.
    """
    axes = as_axes(axes)
    if len(axes) != model.n:
        raise ContractViolation(f"grid has {len(axes)} axes, model has n={model.n}")
    nodes = grid_nodes(axes)
    if batch_phi is not None:
        phis = np.asarray(batch_phi(nodes), dtype=float)
    else:
        phis = np.stack([mapping_matrix(model, x) for x in nodes])
    sig = smallest_singular_value(phis)
    return GridField(axes=axes, values=sig, names=tuple(names))


def sample_singular_set(model: SystemModel, axes, threshold: float, batch_phi=None,
                        field: Optional[GridField] = None) -> List[SingularitySample]:
    """Grid nodes whose smallest singular value is below ``threshold``, in row-major order."""
    if not threshold > 0:
        return []
    if field is None:
        field = sigma_min_field(model, axes, batch_phi=batch_phi)
    nodes = field.nodes()
    vals = field.values.ravel()
    hit = np.flatnonzero(vals < threshold)
    return [SingularitySample(nodes[i].copy(), float(vals[i])) for i in hit]


def write_point_cloud_csv(samples: List[SingularitySample], path, n: Optional[int] = None):
    if n is None:
        n = len(samples[0].state) if samples else 0
    header = [f"x{i + 1}" for i in range(n)] + ["sigma_min"]
    rows = (list(s.state) + [s.sigma_min] for s in samples)
    return atomic_write_text(path, csv_text(header, rows, digits=9))


def pinv(A, tol: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudoinverse; singular values at or below ``tol`` are treated as zero."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    inv = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T
