"""Independent reference implementations used by the tests."""
import itertools

import numpy as np


def enumerate_qp(Q, u_ref, A, b, tol=1e-9):
    """Exact QP minimum by trying every active subset (fine for <= 5 rows).

    Returns (u, objective) or (None, inf) when no subset gives a feasible KKT point.
    """
    m = len(u_ref)
    best_u, best_f = None, np.inf
    for r in range(0, min(len(b), m) + 1):
        for S in itertools.combinations(range(len(b)), r):
            S = list(S)
            if S:
                N = A[S]
                K = np.block([[Q, -N.T], [N, np.zeros((r, r))]])
                rhs = np.concatenate([Q @ u_ref, b[S]])
                try:
                    sol = np.linalg.solve(K, rhs)
                except np.linalg.LinAlgError:
                    continue
                u, mu = sol[:m], sol[m:]
                if np.any(mu < -1e-9):
                    continue
            else:
                u = u_ref.copy()
            if np.all(A @ u >= b - tol):
                e = u - u_ref
                f = 0.5 * e @ Q @ e
                if f < best_f:
                    best_u, best_f = u, f
    return best_u, best_f


def grid_search_qp(Q, u_ref, A, b, center, radius, n=41):
    """Smallest objective over feasible points of a regular grid around ``center``."""
    m = len(u_ref)
    axes = [np.linspace(c - radius, c + radius, n) for c in center]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m)
    ok = np.all(pts @ A.T >= b - 1e-12, axis=1) if len(b) else np.ones(len(pts), bool)
    if not ok.any():
        return np.inf
    e = pts[ok] - u_ref
    return float(np.min(0.5 * np.einsum("ij,jk,ik->i", e, Q, e)))


def random_qp(rng, m=None, n_rows=None, feasible=True):
    m = int(rng.integers(1, 5)) if m is None else m
    n_rows = int(rng.integers(0, 6)) if n_rows is None else n_rows
    L = rng.normal(size=(m, m))
    Q = L @ L.T + 0.1 * np.eye(m)
    u_ref = rng.normal(scale=2.0, size=m)
    A = rng.normal(size=(n_rows, m))
    if feasible:
        u0 = rng.normal(size=m)
        b = A @ u0 - rng.uniform(0.0, 1.0, n_rows)
    else:
        b = rng.normal(size=n_rows)
    return Q, u_ref, A, b


def brute_closest_on_triangles(p, a, b, c, n=0):
    """Closest point by dense barycentric sampling plus exact edge projections."""
    best = (np.inf, None)
    for A_, B_, C_ in zip(a, b, c):
        for P, R in ((A_, B_), (B_, C_), (C_, A_)):
            d = R - P
            t = np.clip((p - P) @ d / (d @ d), 0.0, 1.0)
            q = P + t * d
            dist = np.linalg.norm(p - q)
            if dist < best[0]:
                best = (dist, q)
        nrm = np.cross(B_ - A_, C_ - A_)
        nrm = nrm / np.linalg.norm(nrm)
        q = p - ((p - A_) @ nrm) * nrm
        # inside test via barycentric coordinates
        T = np.column_stack([B_ - A_, C_ - A_])
        lam = np.linalg.lstsq(T, q - A_, rcond=None)[0]
        if lam.min() >= 0 and lam.sum() <= 1:
            dist = np.linalg.norm(p - q)
            if dist < best[0]:
                best = (dist, q)
    return best


def union_find_components(triangles, n_vertices):
    """Connected triangle groups via BFS over shared vertices."""
    by_vertex = [[] for _ in range(n_vertices)]
    for i, t in enumerate(triangles):
        for v in t:
            by_vertex[v].append(i)
    label = -np.ones(len(triangles), dtype=int)
    n = 0
    for s in range(len(triangles)):
        if label[s] >= 0:
            continue
        stack = [s]
        label[s] = n
        while stack:
            i = stack.pop()
            for v in triangles[i]:
                for j in by_vertex[v]:
                    if label[j] < 0:
                        label[j] = n
                        stack.append(j)
        n += 1
    return label, n

