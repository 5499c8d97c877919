import numpy as np
import pytest

from oracles import brute_closest_on_triangles, union_find_components
from singularity_cbf.errors import ContractViolation
from singularity_cbf.geometry import (BVH, Feature, GridAxis, GridField, MeshIndex, TriangleMesh,
                                      brute_force_closest, closest_point_on_mesh, closest_point_on_triangle,
                                      closest_points_on_mesh, distance_barrier_value_and_gradient,
                                      extract_boundary_mesh, periodic_extend, scale_to_unit_cube)


def grid_field(fn, n=21, lo=-1.0, hi=1.0):
    axes = [GridAxis(lo, hi, n)] * 3
    x = np.linspace(lo, hi, n)
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    return GridField(axes, fn(X, Y, Z))


def sphere_mesh(r=0.6, n=21):
    field_ = grid_field(lambda X, Y, Z: np.sqrt(X * X + Y * Y + Z * Z), n)
    return field_, extract_boundary_mesh(field_, r)


def random_mesh(rng, n_tri, n_vert=None):
    n_vert = n_vert or max(3, n_tri)
    V = rng.uniform(0, 1, (n_vert, 3))
    tris = []
    while len(tris) < n_tri:
        t = rng.choice(n_vert, 3, replace=False)
        a, b, c = V[t]
        if 0.5 * np.linalg.norm(np.cross(b - a, c - a)) > 1e-6:
            tris.append(t)
    return TriangleMesh.from_triangles(V, np.array(tris))


def barycentric_residual(p, a, b, c):
    T = np.column_stack([b - a, c - a])
    lam, *_ = np.linalg.lstsq(T, p - a, rcond=None)
    on_plane = np.linalg.norm(a + T @ lam - p)
    outside = max(0.0, -lam.min(), lam.sum() - 1.0)
    return on_plane + outside


# -- unit cube -------------------------------------------------------------

def test_unit_cube_examples():
    pc = scale_to_unit_cube([[0, 0, 0], [2, 4, 8]])
    assert np.array_equal(pc.unit, [[0, 0, 0], [1, 1, 1]])
    assert np.array_equal(pc.scale, [0.5, 0.25, 0.125])
    single = scale_to_unit_cube([[3.0, -1.0, 7.0]])
    assert np.array_equal(single.unit, [[0.5, 0.5, 0.5]])
    assert np.array_equal(single.from_unit(single.unit), [[3.0, -1.0, 7.0]])
    with pytest.raises(ContractViolation):
        scale_to_unit_cube(np.zeros((0, 3)))


def test_unit_cube_round_trip(rng):
    pts = rng.normal(scale=[1.0, 100.0, 1e-3], size=(1000, 3))
    pc = scale_to_unit_cube(pts)
    u = pc.unit
    assert u.min() >= 0.0 and u.max() <= 1.0
    assert np.abs(pc.from_unit(u) - pts).max() < 1e-12 * max(1.0, np.abs(pts).max())


# -- marching cubes ----------------------------------------------------------

def test_plane_mesh():
    x = np.linspace(0, 1, 3)
    field_ = GridField([(0.0, 1.0, 3)] * 3, np.broadcast_to(x[:, None, None], (3, 3, 3)))
    mesh = extract_boundary_mesh(field_, 0.5)
    assert len(mesh.triangles) == 2 * 4
    assert np.abs(mesh.vertices[:, 0] - 0.5).max() < 1e-12
    assert mesh.n_components == 1


def test_iso_outside_range_gives_empty_mesh():
    field_ = grid_field(lambda X, Y, Z: X, 5)
    assert len(extract_boundary_mesh(field_, 5.0).triangles) == 0


def test_sphere_oracle():
    r = 0.6
    field_, mesh = sphere_mesh(r)
    raw = field_.scale.from_unit(mesh.vertices)
    cell = 2.0 / 20
    assert np.abs(np.linalg.norm(raw, axis=1) - r).max() < cell
    assert mesh.n_components == 1
    assert mesh.triangle_areas().min() > 1e-12


def test_vertices_interpolate_to_iso():
    field_, mesh = sphere_mesh(0.55, n=17)
    vals = field_.interpolate(field_.scale.from_unit(mesh.vertices))
    assert np.abs(vals - 0.55).max() < 1e-9


def test_two_blobs_two_components():
    def blobs(X, Y, Z):
        return np.minimum(np.sqrt((X - 0.5) ** 2 + Y ** 2 + Z ** 2), np.sqrt((X + 0.5) ** 2 + Y ** 2 + Z ** 2))
    mesh = extract_boundary_mesh(grid_field(blobs, 31), 0.3)
    assert mesh.n_components == 2
    assert mesh.components == [0, 1]


def test_components_match_bfs_oracle(rng):
    def lumps(X, Y, Z):
        return np.sin(3 * X) * np.cos(2.5 * Y) + 0.4 * np.sin(4 * Z)
    mesh = extract_boundary_mesh(grid_field(lumps, 25), 0.7)
    labels, n = union_find_components(mesh.triangles, len(mesh.vertices))
    assert n == mesh.n_components > 1
    # same partition, possibly with different label names
    pairs = set(zip(labels.tolist(), mesh.component_id.tolist()))
    assert len(pairs) == n
    for _ in range(5):
        m = random_mesh(rng, 40, 60)
        labels, n = union_find_components(m.triangles, len(m.vertices))
        assert n == m.n_components
        assert len(set(zip(labels.tolist(), m.component_id.tolist()))) == n


def test_deterministic_mesh():
    f1, m1 = sphere_mesh()
    f2, m2 = sphere_mesh()
    assert m1.vertices.tobytes() == m2.vertices.tobytes()
    assert m1.triangles.tobytes() == m2.triangles.tobytes()


# -- closest points ------------------------------------------------------------

T = (np.array([0.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0]))


def test_triangle_examples():
    r = closest_point_on_triangle([0.25, 0.25, 1.0], *T)
    assert np.allclose(r.point, [0.25, 0.25, 0.0]) and r.distance == 1.0 and r.feature is Feature.FACE
    r = closest_point_on_triangle([2.0, 2.0, 0.0], *T)
    assert np.allclose(r.point, [0.5, 0.5, 0.0]) and np.isclose(r.distance, np.sqrt(4.5))
    assert r.feature is Feature.EDGE
    r = closest_point_on_triangle([-1.0, -1.0, 0.0], *T)
    assert np.array_equal(r.point, [0.0, 0.0, 0.0]) and np.isclose(r.distance, np.sqrt(2.0))
    assert r.feature is Feature.VERTEX
    with pytest.raises(ContractViolation):
        closest_point_on_triangle([0, 0, 1], [0, 0, 0], [1, 1, 1], [2, 2, 2])


def test_triangle_against_dense_oracle(rng):
    for _ in range(300):
        a, b, c = rng.normal(size=(3, 3))
        p = rng.normal(scale=2.0, size=3)
        r = closest_point_on_triangle(p, a, b, c)
        d_or, _ = brute_closest_on_triangles(p, [a], [b], [c])
        assert abs(r.distance - d_or) < 1e-12 * max(1.0, d_or)
        assert abs(r.distance - np.linalg.norm(p - r.point)) < 1e-12
        assert barycentric_residual(r.point, a, b, c) < 1e-9


def test_single_triangle_mesh_matches_triangle():
    mesh = TriangleMesh.from_triangles(np.array(T), [[0, 1, 2]])
    for q in ([0.25, 0.25, 1.0], [2.0, 2.0, 0.0], [-1.0, -1.0, 0.0]):
        a = closest_point_on_mesh(mesh, 0, q)
        b = closest_point_on_triangle(q, *T)
        assert np.array_equal(a.point, b.point) and a.distance == b.distance and a.feature is b.feature


def test_unknown_component():
    mesh = TriangleMesh.from_triangles(np.array(T), [[0, 1, 2]])
    with pytest.raises(ContractViolation):
        closest_point_on_mesh(mesh, 5, [0, 0, 0])
    with pytest.raises(ContractViolation):
        brute_force_closest(mesh, 5, [0, 0, 0])


def test_bvh_matches_brute_force_random_meshes(rng):
    for n_tri in (1, 7, 60, 500):
        mesh = random_mesh(rng, n_tri)
        for q in rng.uniform(-0.5, 1.5, (60, 3)):
            for cid in mesh.components:
                a = closest_point_on_mesh(mesh, cid, q)
                b = brute_force_closest(mesh, cid, q)
                assert a.triangle == b.triangle
                assert a.distance == b.distance


def test_tie_break_lowest_triangle_index():
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 0], [1, 0, 0], [0, 1, 0.0]])
    # two copies of the same triangle; the lower index must win
    mesh = TriangleMesh(V, np.array([[3, 4, 5], [0, 1, 2]]), np.array([0, 0]))
    assert closest_point_on_mesh(mesh, 0, [0.2, 0.2, 1.0]).triangle == 0
    assert brute_force_closest(mesh, 0, [0.2, 0.2, 1.0]).triangle == 0


def test_sphere_queries():
    r = 0.6
    field_, mesh = sphere_mesh(r)
    scale = field_.scale.scale[0]   # raw -> unit factor (isotropic here)
    cell = 1.0 / 20
    rng = np.random.default_rng(5)
    for d in rng.normal(size=(20, 3)):
        d /= np.linalg.norm(d)
        q = field_.scale.to_unit(2 * r * d)
        res = closest_point_on_mesh(mesh, 0, q)
        assert abs(res.distance - r * scale) < cell
        assert np.linalg.norm(res.point - field_.scale.to_unit(r * d)) < cell
        # outside a convex mesh by s, distance is at least s up to the mesh's inset
        for s in (0.1, 0.3):
            qs = field_.scale.to_unit((r + s) * d)
            assert closest_point_on_mesh(mesh, 0, qs).distance >= s * scale - cell


def test_all_components_listed():
    def blobs(X, Y, Z):
        return np.minimum(np.sqrt((X - 0.5) ** 2 + Y ** 2 + Z ** 2), np.sqrt((X + 0.5) ** 2 + Y ** 2 + Z ** 2))
    mesh = extract_boundary_mesh(grid_field(blobs, 31), 0.3)
    res = closest_points_on_mesh(mesh, [0.1, 0.5, 0.5])
    assert [r.component_id for r in res] == [0, 1]


def test_mesh_index_matches_brute_force(rng):
    def lumps(X, Y, Z):
        return np.sin(3 * X) * np.cos(2.5 * Y) + 0.4 * np.sin(4 * Z)
    mesh = extract_boundary_mesh(grid_field(lumps, 21), 0.7)
    index = MeshIndex(mesh)
    cached = MeshIndex(mesh, cache_radius=0.05)
    p = rng.uniform(0, 1, 3)
    for _ in range(150):
        p = np.clip(p + rng.normal(scale=0.02, size=3), -0.2, 1.2)
        ref = [brute_force_closest(mesh, c, p) for c in mesh.components]
        for idx in (index, cached):
            got = idx.query(p)
            assert [g.component_id for g in got] == mesh.components
            for g, r in zip(got, ref):
                assert g.triangle == r.triangle and abs(g.distance - r.distance) < 1e-12
        near = cached.query(p, horizon=0.15)
        assert [g.component_id for g in near] == [r.component_id for r in ref if r.distance <= 0.15]


def test_bvh_hint_does_not_change_answer(rng):
    mesh = random_mesh(rng, 200)
    bvh = BVH(mesh.vertices, mesh.triangles, np.arange(len(mesh.triangles)))
    for q in rng.uniform(0, 1, (50, 3)):
        base = bvh.query(q)
        hinted = bvh.query(q, hint=int(rng.integers(len(mesh.triangles))))
        assert base[3] == hinted[3] and base[1] == hinted[1]


# -- distance barrier ------------------------------------------------------------

def test_distance_barrier_value_and_gradient():
    r = closest_point_on_triangle([1.0, 0.0, 0.0], [0, 0, 0], [0, 1, 0], [0, 0, 1])
    h, g = distance_barrier_value_and_gradient([1.0, 0.0, 0.0], r, 0.5)
    assert h == 0.375 and np.array_equal(g, [1.0, 0.0, 0.0])
    h, _ = distance_barrier_value_and_gradient([1.0, 0.0, 0.0], r, 1.0)
    assert h == 0.0


def test_distance_barrier_sign(rng):
    mesh = random_mesh(rng, 30)
    for q in rng.uniform(0, 1, (100, 3)):
        res = closest_point_on_mesh(mesh, mesh.components[0], q)
        delta = rng.uniform(0, 0.3)
        h, _ = distance_barrier_value_and_gradient(q, res, delta)
        assert (h < 0) == (res.distance < delta)


def test_distance_gradient_matches_fd_on_faces():
    _, mesh = sphere_mesh(0.6)
    rng = np.random.default_rng(11)
    delta, checked = 0.02, 0
    for q in rng.uniform(0, 1, (300, 3)):
        res = closest_point_on_mesh(mesh, 0, q)
        if res.feature is not Feature.FACE:
            continue
        _, grad = distance_barrier_value_and_gradient(q, res, delta)
        fd = np.zeros(3)
        for k in range(3):
            e = np.zeros(3)
            e[k] = 1e-6
            hp = 0.5 * (closest_point_on_mesh(mesh, 0, q + e).distance ** 2 - delta ** 2)
            hm = 0.5 * (closest_point_on_mesh(mesh, 0, q - e).distance ** 2 - delta ** 2)
            fd[k] = (hp - hm) / 2e-6
        if closest_point_on_mesh(mesh, 0, q + 1e-6).triangle != res.triangle:
            continue
        assert np.abs(fd - grad).max() < 1e-5
        checked += 1
    assert checked > 20


# -- files and grids ------------------------------------------------------------

def test_obj_groups(tmp_path):
    def blobs(X, Y, Z):
        return np.minimum(np.sqrt((X - 0.5) ** 2 + Y ** 2 + Z ** 2), np.sqrt((X + 0.5) ** 2 + Y ** 2 + Z ** 2))
    field_ = grid_field(blobs, 21)
    mesh = extract_boundary_mesh(field_, 0.3)
    text = mesh.to_obj(tmp_path / "m.obj", scale=field_.scale).read_text().splitlines()
    assert [l for l in text if l.startswith("g ")] == ["g obstacle_0", "g obstacle_1"]
    assert sum(l.startswith("v ") for l in text) == len(mesh.vertices)
    assert sum(l.startswith("f ") for l in text) == len(mesh.triangles)
    v = np.array([[float(t) for t in l.split()[1:]] for l in text if l.startswith("v ")])
    assert np.allclose(v, field_.scale.from_unit(mesh.vertices), atol=1e-8)


def test_grid_field_csv_round_trip(tmp_path):
    field_ = grid_field(lambda X, Y, Z: X * Y + Z, 5)
    back = GridField.from_csv(field_.to_csv(tmp_path / "f.csv"))
    assert back.axes == field_.axes
    assert np.array_equal(back.values, field_.values)
    first = (tmp_path / "f.csv").read_text().splitlines()[0]
    assert first.startswith("# grid x1=-1.0:1.0:5")
    (tmp_path / "bad.csv").write_text("x,value\n")
    with pytest.raises(ContractViolation):
        GridField.from_csv(tmp_path / "bad.csv")


def test_grid_axis_validation():
    with pytest.raises(ContractViolation):
        GridAxis(0.0, 1.0, 1)
    with pytest.raises(ContractViolation):
        GridAxis(1.0, 1.0, 3)


def test_periodic_extend():
    axes = (GridAxis(0.0, 1.0, 2), GridAxis(0.0, 1.0, 2), GridAxis(-np.pi, np.pi, 9))
    th = np.linspace(-np.pi, np.pi, 9)
    vals = np.broadcast_to(np.cos(th), (2, 2, 9))
    ext = periodic_extend(GridField(axes, vals), 2, 2 * np.pi, -2 * np.pi, 2 * np.pi)
    nodes = ext.axes[2].nodes()
    assert ext.axes[2].count == 17
    assert np.allclose(ext.values[0, 0], np.cos(nodes), atol=1e-12)
    with pytest.raises(ContractViolation):
        periodic_extend(GridField(axes, vals), 2, np.pi, -2 * np.pi, 2 * np.pi)
