"""Configuration-space obstacle geometry.

Sampled singular sets live on a regular grid of smallest-singular-value values.
The boundary of ``{sigma_min < iso}`` is triangulated with marching cubes in
unit-cube coordinates, split into connected components (one obstacle each), and
queried for closest points with a per-component bounding-volume hierarchy.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ._io import atomic_write_text, csv_text
from .errors import ContractViolation

DEGENERATE_AREA = 1e-12


# ---------------------------------------------------------------------------
# unit-cube scaling


@dataclass(frozen=True)
class PointCloud:
    """Raw points plus the per-axis affine map into the unit cube.

    ``unit = (raw - offset) * scale + shift``.  Axes with zero extent get
    ``scale = 0`` and ``shift = 0.5``.
    """

    points: np.ndarray
    offset: np.ndarray
    scale: np.ndarray
    shift: np.ndarray

    @property
    def unit(self) -> np.ndarray:
        return self.to_unit(self.points)

    def to_unit(self, p) -> np.ndarray:
        return (np.asarray(p, dtype=float) - self.offset) * self.scale + self.shift

    def from_unit(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        safe = np.where(self.scale == 0.0, 1.0, self.scale)
        return np.where(self.scale == 0.0, self.offset, self.offset + (s - self.shift) / safe)

    def __len__(self):
        return len(self.points)


def scale_to_unit_cube(points) -> PointCloud:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0 or pts.shape[0] == 0:
        raise ContractViolation("cannot scale an empty point cloud")
    lo = pts.min(axis=0)
    extent = pts.max(axis=0) - lo
    degenerate = extent == 0.0
    scale = np.where(degenerate, 0.0, 1.0 / np.where(degenerate, 1.0, extent))
    shift = np.where(degenerate, 0.5, 0.0)
    return PointCloud(points=pts, offset=lo, scale=scale, shift=shift)


# ---------------------------------------------------------------------------
# grid fields


@dataclass(frozen=True)
class GridAxis:
    lo: float
    hi: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ContractViolation("grid axes need at least 2 nodes")
        if not self.hi > self.lo:
            raise ContractViolation(f"grid axis needs hi > lo, got [{self.lo}, {self.hi}]")

    def nodes(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.count)


def as_axes(axes) -> Tuple[GridAxis, ...]:
    return tuple(a if isinstance(a, GridAxis) else GridAxis(float(a[0]), float(a[1]), int(a[2])) for a in axes)


def grid_nodes(axes) -> np.ndarray:
    """All grid nodes in row-major order (last axis varies fastest), shape (N, dim)."""
    axes = as_axes(axes)
    mesh = np.meshgrid(*[a.nodes() for a in axes], indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class GridField:
    axes: Tuple[GridAxis, ...]
    values: np.ndarray
    names: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "axes", as_axes(self.axes))
        vals = np.asarray(self.values, dtype=float)
        shape = tuple(a.count for a in self.axes)
        if vals.shape != shape:
            vals = vals.reshape(shape)
        object.__setattr__(self, "values", vals)
        if not self.names:
            object.__setattr__(self, "names", tuple(f"x{i + 1}" for i in range(len(self.axes))))

    @property
    def ndim(self) -> int:
        return len(self.axes)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a.lo for a in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a.hi for a in self.axes])

    @property
    def cell_size(self) -> np.ndarray:
        """Cell edge lengths in unit-cube coordinates."""
        return np.array([1.0 / (a.count - 1) for a in self.axes])

    @property
    def scale(self) -> PointCloud:
        """Unit-cube map spanning the grid's bounding box."""
        return scale_to_unit_cube(np.stack([self.lower, self.upper]))

    def nodes(self) -> np.ndarray:
        return grid_nodes(self.axes)

    def interpolate(self, points) -> np.ndarray:
        """Multilinear interpolation at raw-coordinate points, shape (N, dim)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        counts = np.array([a.count for a in self.axes])
        idx = (pts - self.lower) / (self.upper - self.lower) * (counts - 1)
        base = np.clip(np.floor(idx).astype(int), 0, counts - 2)
        frac = idx - base
        out = np.zeros(len(pts))
        for corner in range(2 ** self.ndim):
            bits = [(corner >> k) & 1 for k in range(self.ndim)]
            w = np.ones(len(pts))
            ii = []
            for k, b in enumerate(bits):
                w = w * (frac[:, k] if b else 1.0 - frac[:, k])
                ii.append(base[:, k] + b)
            out += w * self.values[tuple(ii)]
        return out

    def to_csv(self, path) -> Path:
        spec = " ".join(f"{n}={a.lo!r}:{a.hi!r}:{a.count}" for n, a in zip(self.names, self.axes))
        body = csv_text(list(self.names) + ["value"],
                        (list(p) + [v] for p, v in zip(self.nodes(), self.values.ravel())), digits=17)
        return atomic_write_text(path, f"# grid {spec}\n" + body)

    @classmethod
    def from_csv(cls, path) -> "GridField":
        lines = Path(path).read_text().splitlines()
        if not lines or not lines[0].startswith("# grid "):
            raise ContractViolation(f"{path}: missing '# grid' header line")
        names, axes = [], []
        for tok in lines[0][len("# grid "):].split():
            m = re.fullmatch(r"([^=]+)=([^:]+):([^:]+):(\d+)", tok)
            if m is None:
                raise ContractViolation(f"{path}: cannot parse grid axis {tok!r}")
            names.append(m.group(1))
            axes.append(GridAxis(float(m.group(2)), float(m.group(3)), int(m.group(4))))
        data = np.loadtxt(lines[2:], delimiter=",", ndmin=2)
        return cls(axes=tuple(axes), values=data[:, -1], names=tuple(names))


# ---------------------------------------------------------------------------
# meshes


class Feature(enum.Enum):
    FACE = "face"
    EDGE = "edge"
    VERTEX = "vertex"


@dataclass
class TriangleMesh:
    """Triangle soup with shared vertices and a connected-component id per triangle."""

    vertices: np.ndarray
    triangles: np.ndarray
    component_id: np.ndarray
    _bvh: Dict[int, "BVH"] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.component_id = np.asarray(self.component_id, dtype=np.int64).reshape(-1)
        if len(self.component_id) != len(self.triangles):
            raise ContractViolation("component_id needs one entry per triangle")
        if len(self.triangles) and (self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)):
            raise ContractViolation("triangle index out of range")

    @classmethod
    def from_triangles(cls, vertices, triangles) -> "TriangleMesh":
        tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        return cls(vertices, tris, connected_components(tris, len(np.asarray(vertices).reshape(-1, 3))))

    @property
    def n_components(self) -> int:
        return int(len(np.unique(self.component_id)))

    @property
    def components(self) -> List[int]:
        return [int(c) for c in np.unique(self.component_id)]

    def triangle_areas(self) -> np.ndarray:
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def bvh(self, component_id: int) -> "BVH":
        cid = int(component_id)
        if cid not in self._bvh:
            idx = np.flatnonzero(self.component_id == cid)
            if idx.size == 0:
                raise ContractViolation(f"unknown mesh component {cid}")
            self._bvh[cid] = BVH(self.vertices, self.triangles, idx)
        return self._bvh[cid]

    def to_obj(self, path, scale: Optional[PointCloud] = None) -> Path:
        """Write an OBJ file; one ``g obstacle_<id>`` group per component.

        With ``scale`` the vertices are mapped back from unit-cube to raw coordinates.
        """
        verts = self.vertices if scale is None else scale.from_unit(self.vertices)
        lines = [f"v {x:.9g} {y:.9g} {z:.9g}" for x, y, z in verts]
        for cid in self.components:
            lines.append(f"g obstacle_{cid}")
            for t in self.triangles[self.component_id == cid]:
                lines.append(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}")
        return atomic_write_text(path, "\n".join(lines) + "\n")


def connected_components(triangles: np.ndarray, n_vertices: int) -> np.ndarray:
    """Label triangles by shared-vertex connectivity.

    Labels are 0, 1, ... in order of each component's lowest triangle index.
    """
    parent = np.arange(n_vertices)

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    for a, b, c in triangles:
        ra, rb, rc = find(a), find(b), find(c)
        r = min(ra, rb, rc)
        parent[ra] = parent[rb] = parent[rc] = r

    roots = np.array([find(t[0]) for t in triangles], dtype=np.int64)
    labels = np.empty(len(triangles), dtype=np.int64)
    seen: Dict[int, int] = {}
    for i, r in enumerate(roots):
        labels[i] = seen.setdefault(int(r), len(seen))
    return labels


def _refine_on_edges(vals: np.ndarray, iso: float, idx: np.ndarray) -> np.ndarray:
    """Redo the edge interpolation of marching-cubes vertices in double precision.

    ``idx`` holds vertex positions in grid-index units.  Each vertex sits on a
    grid edge: two coordinates are integers and the third is fractional.
    """
    frac = np.abs(idx - np.round(idx))
    axis = np.argmax(frac, axis=1)
    base = np.round(idx).astype(np.int64)
    rows = np.arange(len(idx))
    lo = base.copy()
    lo[rows, axis] = np.floor(idx[rows, axis]).astype(np.int64)
    top = np.array(vals.shape) - 1
    lo = np.minimum(lo, top)
    hi = lo.copy()
    hi[rows, axis] = np.minimum(lo[rows, axis] + 1, top[axis])
    f0 = vals[lo[:, 0], lo[:, 1], lo[:, 2]]
    f1 = vals[hi[:, 0], hi[:, 1], hi[:, 2]]
    out = lo.astype(float)
    span = f1 - f0
    ok = (span != 0.0) & (hi[rows, axis] != lo[rows, axis])
    t = np.where(ok, (iso - f0) / np.where(ok, span, 1.0), idx[rows, axis] - lo[rows, axis])
    out[rows, axis] = lo[rows, axis] + np.clip(t, 0.0, 1.0)
    return out


def extract_boundary_mesh(field_: GridField, iso: float, frame: Optional[PointCloud] = None) -> TriangleMesh:
    """Isosurface ``values == iso`` of a 3D grid field, in unit-cube coordinates.

    By default the unit cube is the field's own bounding box; pass ``frame`` to
    express vertices in another unit-cube map (e.g. that of a base period when
    the field has been periodically extended).
    """
    from skimage.measure import marching_cubes

    if field_.ndim != 3:
        raise ContractViolation("boundary extraction needs a 3D grid field")
    vals = field_.values
    if not (vals.min() < iso < vals.max()):
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), np.zeros(0, dtype=np.int64))
    verts, tris, _, _ = marching_cubes(
        vals, level=iso, spacing=tuple(field_.cell_size), method="lorensen", allow_degenerate=False
    )
    verts = _refine_on_edges(vals, iso, verts.astype(float) / field_.cell_size) * field_.cell_size
    if frame is not None:
        verts = frame.to_unit(field_.scale.from_unit(verts))
    tris = tris.astype(np.int64)
    a, b, c = (verts[tris[:, k]] for k in range(3))
    keep = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1) > DEGENERATE_AREA
    tris = tris[keep]
    return TriangleMesh.from_triangles(verts, tris)


# ---------------------------------------------------------------------------
# closest points


@dataclass(frozen=True)
class ClosestPointResult:
    point: np.ndarray
    distance: float
    component_id: int
    feature: Feature
    triangle: int = -1


def _dot(u, v):
    # explicit sum keeps results bitwise independent of batch size
    return u[..., 0] * v[..., 0] + u[..., 1] * v[..., 1] + u[..., 2] * v[..., 2]


_FEATURES = (Feature.VERTEX, Feature.VERTEX, Feature.EDGE, Feature.VERTEX, Feature.EDGE, Feature.EDGE, Feature.FACE)


def closest_points_batch(p, a, b, c):
    """Closest points on triangles (a[i], b[i], c[i]) to query ``p``.

    Region classification over the three vertex, three edge and one face
    Voronoi regions.  Returns ``(points, squared distances, region codes)``;
    region codes index ``_FEATURES`` (0=A, 1=B, 2=AB, 3=C, 4=AC, 5=BC, 6=face).
    """
    p = np.asarray(p, dtype=float)
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    bp = p - b
    d3 = _dot(ab, bp)
    d4 = _dot(ac, bp)
    cp = p - c
    d5 = _dot(ab, cp)
    d6 = _dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    in_a = (d1 <= 0) & (d2 <= 0)
    in_b = (d3 >= 0) & (d4 <= d3)
    in_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    in_c = (d6 >= 0) & (d5 <= d6)
    in_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    in_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)

    with np.errstate(divide="ignore", invalid="ignore"):
        t_ab = d1 / (d1 - d3)
        t_ac = d2 / (d2 - d6)
        t_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom

    code = np.select([in_a, in_b, in_ab, in_c, in_ac, in_bc], [0, 1, 2, 3, 4, 5], default=6)
    cand = [
        a,
        b,
        a + t_ab[..., None] * ab,
        c,
        a + t_ac[..., None] * ac,
        b + t_bc[..., None] * (c - b),
        a + v[..., None] * ab + w[..., None] * ac,
    ]
    pts = np.empty_like(a)
    for k in range(7):
        sel = code == k
        if np.any(sel):
            pts[sel] = cand[k][sel]
    diff = p - pts
    return pts, _dot(diff, diff), code


def closest_point_on_triangle(query, a, b, c) -> ClosestPointResult:
    a, b, c = (np.asarray(v, dtype=float).reshape(1, 3) for v in (a, b, c))
    if 0.5 * np.linalg.norm(np.cross(b - a, c - a)) <= DEGENERATE_AREA:
        raise ContractViolation("degenerate triangle")
    pts, d2, code = closest_points_batch(np.asarray(query, dtype=float), a, b, c)
    return ClosestPointResult(pts[0].copy(), float(np.sqrt(d2[0])), -1, _FEATURES[int(code[0])], 0)


class BVH:
    """Axis-aligned bounding-volume hierarchy over a subset of a mesh's triangles."""

    leaf_size = 16

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray, subset: np.ndarray):
        subset = np.asarray(subset, dtype=np.int64)
        tri = triangles[subset]
        self.a = vertices[tri[:, 0]]
        self.b = vertices[tri[:, 1]]
        self.c = vertices[tri[:, 2]]
        self.tri_index = subset
        lo = np.minimum(np.minimum(self.a, self.b), self.c)
        hi = np.maximum(np.maximum(self.a, self.b), self.c)
        centroid = (self.a + self.b + self.c) / 3.0

        order = np.arange(len(subset))
        node_lo, node_hi, left, right, start, count = [], [], [], [], [], []

        def build(ids: np.ndarray) -> int:
            node = len(node_lo)
            node_lo.append(lo[ids].min(axis=0))
            node_hi.append(hi[ids].max(axis=0))
            left.append(-1)
            right.append(-1)
            start.append(-1)
            count.append(0)
            if len(ids) <= self.leaf_size:
                start[node] = len(leaf_order)
                count[node] = len(ids)
                leaf_order.extend(ids.tolist())
                return node
            spread = centroid[ids].max(axis=0) - centroid[ids].min(axis=0)
            axis = int(np.argmax(spread))
            ids = ids[np.argsort(centroid[ids, axis], kind="stable")]
            half = len(ids) // 2
            left[node] = build(ids[:half])
            right[node] = build(ids[half:])
            return node

        leaf_order: List[int] = []
        build(order)
        perm = np.array(leaf_order, dtype=np.int64)
        self.a, self.b, self.c = self.a[perm], self.b[perm], self.c[perm]
        self.tri_index = self.tri_index[perm]
        self.position = {int(t): i for i, t in enumerate(self.tri_index)}
        self.node_lo = np.array(node_lo)
        self.node_hi = np.array(node_hi)
        self.left = left
        self.right = right
        self.start = start
        self.count = count

    def _box_d2(self, node: int, p: np.ndarray) -> float:
        d = np.maximum(np.maximum(self.node_lo[node] - p, p - self.node_hi[node]), 0.0)
        return float(d[0] * d[0] + d[1] * d[1] + d[2] * d[2])

    def query(self, p, hint: Optional[int] = None) -> Tuple[np.ndarray, float, int, int]:
        """Return (point, squared distance, region code, mesh triangle index).

        ``hint`` is a mesh triangle index (typically last step's answer) used as
        the initial upper bound; it only speeds up pruning.
        """
        p = np.asarray(p, dtype=float)
        best = (None, np.inf, -1, np.iinfo(np.int64).max)
        if hint is not None and int(hint) in self.position:
            i = self.position[int(hint)]
            pts, d2, code = closest_points_batch(p, self.a[i:i + 1], self.b[i:i + 1], self.c[i:i + 1])
            best = (pts[0].copy(), float(d2[0]), int(code[0]), int(hint))
        stack = [(0, self._box_d2(0, p))]
        while stack:
            node, bd2 = stack.pop()
            if bd2 > best[1]:
                continue
            if self.left[node] < 0:
                s, n = self.start[node], self.count[node]
                pts, d2, code = closest_points_batch(p, self.a[s:s + n], self.b[s:s + n], self.c[s:s + n])
                dmin = d2.min()
                if dmin <= best[1]:
                    cands = np.flatnonzero(d2 == dmin)
                    k = cands[np.argmin(self.tri_index[s + cands])]
                    tidx = int(self.tri_index[s + k])
                    if dmin < best[1] or tidx < best[3]:
                        best = (pts[k].copy(), float(dmin), int(code[k]), tidx)
                continue
            l, r = self.left[node], self.right[node]
            dl, dr = self._box_d2(l, p), self._box_d2(r, p)
            # nearer child popped first
            if dl <= dr:
                stack.append((r, dr))
                stack.append((l, dl))
            else:
                stack.append((l, dl))
                stack.append((r, dr))
        return best


def closest_point_on_mesh(mesh: TriangleMesh, component_id: int, query, hint: Optional[int] = None
                          ) -> ClosestPointResult:
    point, d2, code, tidx = mesh.bvh(component_id).query(query, hint)
    return ClosestPointResult(point, float(np.sqrt(d2)), int(component_id), _FEATURES[code], tidx)


def closest_points_on_mesh(mesh: TriangleMesh, query) -> List[ClosestPointResult]:
    """Closest point on every component, in component-id order."""
    return [closest_point_on_mesh(mesh, cid, query) for cid in mesh.components]


def brute_force_closest(mesh: TriangleMesh, component_id: int, query) -> ClosestPointResult:
    """Linear scan over a component's triangles; reference path for the BVH."""
    idx = np.flatnonzero(mesh.component_id == component_id)
    if idx.size == 0:
        raise ContractViolation(f"unknown mesh component {component_id}")
    t = mesh.triangles[idx]
    pts, d2, code = closest_points_batch(
        np.asarray(query, dtype=float), mesh.vertices[t[:, 0]], mesh.vertices[t[:, 1]], mesh.vertices[t[:, 2]]
    )
    k = int(np.argmin(d2))  # argmin returns the first (lowest index) minimum
    return ClosestPointResult(pts[k].copy(), float(np.sqrt(d2[k])), int(component_id), _FEATURES[int(code[k])], int(idx[k]))


def distance_barrier_value_and_gradient(query, result: ClosestPointResult, delta: float):
    """``h = (|X - p|^2 - delta^2) / 2`` with the closest point ``p`` held fixed."""
    diff = np.asarray(query, dtype=float) - result.point
    return 0.5 * (float(diff @ diff) - delta * delta), diff


def periodic_extend(field_: GridField, axis: int, period: float, lo: float, hi: float) -> GridField:
    """Re-sample a field that is periodic along ``axis`` onto the wider range [lo, hi].

    The source axis must span exactly one period with both end nodes present,
    so new nodes land on copies of existing ones; values are reused, not
    re-evaluated.
    """
    ax = field_.axes[axis]
    span = ax.hi - ax.lo
    if not np.isclose(span, period, rtol=1e-12, atol=0.0):
        raise ContractViolation("source axis must cover exactly one period")
    step_ = span / (ax.count - 1)
    k_lo = int(np.round((lo - ax.lo) / step_))
    k_hi = int(np.round((hi - ax.lo) / step_))
    idx = np.mod(np.arange(k_lo, k_hi + 1), ax.count - 1)
    values = np.take(field_.values, idx, axis=axis)
    axes = list(field_.axes)
    axes[axis] = GridAxis(ax.lo + k_lo * step_, ax.lo + k_hi * step_, k_hi - k_lo + 1)
    return GridField(axes=tuple(axes), values=values, names=field_.names)


class MeshIndex:
    """Batch closest-point queries against every component of a mesh at once.

    Leaves of the per-component BVHs are flattened into one array.  A query
    bounds each component's distance from above with the triangles of its
    nearest leaf box, keeps only leaves whose box is within that bound, and runs
    one vectorized closest-point pass over their triangles.
    """

    def __init__(self, mesh: TriangleMesh, cache_radius: float = 0.0):
        self.mesh = mesh
        self.components = mesh.components
        self.cache_radius = float(cache_radius)
        self._cache = None
        a, b, c, tri, lo, hi, comp, start, count = [], [], [], [], [], [], [], [], []
        offset = 0
        for k, cid in enumerate(self.components):
            bvh = mesh.bvh(cid)
            for node in range(len(bvh.left)):
                if bvh.left[node] >= 0:
                    continue
                s, n = bvh.start[node], bvh.count[node]
                lo.append(bvh.node_lo[node])
                hi.append(bvh.node_hi[node])
                comp.append(k)
                start.append(offset + s)
                count.append(n)
            a.append(bvh.a)
            b.append(bvh.b)
            c.append(bvh.c)
            tri.append(bvh.tri_index)
            offset += len(bvh.tri_index)
        order = np.argsort(np.asarray(comp), kind="stable")
        self.leaf_lo = np.asarray(lo)[order]
        self.leaf_hi = np.asarray(hi)[order]
        self.leaf_comp = np.asarray(comp, dtype=np.int64)[order]
        self.leaf_start = np.asarray(start, dtype=np.int64)[order]
        self.leaf_count = np.asarray(count, dtype=np.int64)[order]
        self.group_start = np.flatnonzero(np.r_[True, np.diff(self.leaf_comp) != 0])
        self.a = np.concatenate(a) if a else np.zeros((0, 3))
        self.b = np.concatenate(b) if b else np.zeros((0, 3))
        self.c = np.concatenate(c) if c else np.zeros((0, 3))
        self.tri_index = np.concatenate(tri) if tri else np.zeros(0, dtype=np.int64)
        self.tri_lo = np.minimum(np.minimum(self.a, self.b), self.c)
        self.tri_hi = np.maximum(np.maximum(self.a, self.b), self.c)
        self.tri_comp = np.repeat(np.arange(len(self.components)), [len(t) for t in tri]) if tri else np.zeros(0, int)

    def _gather(self, leaves):
        counts = self.leaf_count[leaves]
        starts = np.repeat(self.leaf_start[leaves] - np.cumsum(counts) + counts, counts)
        return starts + np.arange(counts.sum())

    def candidates(self, p, margin: float = 0.0, horizon: float = np.inf) -> np.ndarray:
        """Triangles that may be closest on their component for any query within ``margin`` of ``p``.

        If the closest triangle of a component sits at distance D from ``p``,
        then for a query q with |q - p| <= margin it lies at most D + margin
        from q, so its bounding box is within D + 2 margin of ``p``.
        Components whose boxes are all farther than ``horizon + margin`` are left out.
        """
        p = np.asarray(p, dtype=float)
        near = np.maximum(np.maximum(self.leaf_lo - p, 0.0), p - self.leaf_hi)
        dmin2 = np.sum(near * near, axis=1)
        live = np.minimum.reduceat(dmin2, self.group_start) <= (horizon + margin) ** 2
        if not live.any():
            return np.zeros(0, dtype=np.int64)
        # exact distance to the nearest leaf of each component bounds the search
        seed = np.lexsort((dmin2, self.leaf_comp))[self.group_start[live]]
        idx = self._gather(seed)
        _, d2, _ = closest_points_batch(p, self.a[idx], self.b[idx], self.c[idx])
        ub = np.full(len(self.components), -1.0)
        ub[live] = np.minimum.reduceat(d2, np.r_[0, np.cumsum(self.leaf_count[seed])[:-1]])
        ub[live] = (np.sqrt(ub[live]) + 2.0 * margin) ** 2 * (1.0 + 1e-12)
        idx = self._gather(np.flatnonzero(dmin2 <= ub[self.leaf_comp]))
        near = np.maximum(np.maximum(self.tri_lo[idx] - p, 0.0), p - self.tri_hi[idx])
        return idx[np.sum(near * near, axis=1) <= ub[self.tri_comp[idx]]]

    def query(self, p, horizon: float = np.inf) -> List[ClosestPointResult]:
        """Closest point on every component within ``horizon`` of ``p``, in component order.

        Candidate sets are reused while queries stay within ``cache_radius`` of
        the point they were built for; the answer is the same either way.
        """
        if not self.components:
            return []
        p = np.asarray(p, dtype=float)
        cached = self._cache
        if (cached is not None and cached[2] == horizon
                and np.sum((p - cached[0]) ** 2) <= self.cache_radius ** 2):
            idx = cached[1]
        else:
            idx = self.candidates(p, self.cache_radius, horizon)
            self._cache = (p.copy(), idx, horizon)
        if idx.size == 0:
            return []
        pts, d2, code = closest_points_batch(p, self.a[idx], self.b[idx], self.c[idx])
        comp = self.tri_comp[idx]
        tri = self.tri_index[idx]
        order = np.lexsort((tri, d2, comp))
        first = order[np.flatnonzero(np.r_[True, np.diff(comp[order]) != 0])]
        first = first[d2[first] <= horizon * horizon]
        return [
            ClosestPointResult(pts[i], float(np.sqrt(d2[i])), int(self.components[comp[i]]),
                               _FEATURES[int(code[i])], int(tri[i]))
            for i in first
        ]
