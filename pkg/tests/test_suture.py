import numpy as np
import pytest

from singularity_cbf.dynamics import SimulatorConfig
from singularity_cbf.errors import ConfigurationError
from singularity_cbf.magnetic import actuation_matrix
from singularity_cbf.suture import CirclePath, PosePath, SutureConfig, run_suturing_scenario, stitch_path


def test_map_statistics(obstacles, rig):
    assert len(obstacles.samples) > 0
    assert obstacles.mesh.n_components >= 1
    assert obstacles.field.values.shape == (40, 40, 60)
    assert obstacles.field.values.min() >= 0
    # the singular set includes the y = 0 line at theta = 0
    g = actuation_matrix(rig.coils, np.array([2.0, 0.0, 0.0]), rig.agent)
    assert np.linalg.svd(g, compute_uv=False).min() < 1e-9


def test_stitch_path_shape():
    path = stitch_path(3, 10.0, 5.0, 3.0, 0.15)
    wps = np.array(path.waypoints)
    assert len(wps) == 4
    assert np.array_equal(np.sign(wps[:, 1]), [-1, 1, -1, 1])
    # crossings of the incision line sit at -5, 0, 5
    xs = [wps[k, 0] + (wps[k + 1, 0] - wps[k, 0]) * 0.5 for k in range(3)]
    assert np.allclose(xs, [-5.0, 0.0, 5.0])
    with pytest.raises(ConfigurationError):
        stitch_path(0)


def test_pose_path_sampling():
    path = PosePath(((0.0, 0.0), (3.0, 4.0)), speed=1.0, theta_ref=0.2, hold_start=0.5, hold_end=1.0)
    assert np.isclose(path.duration, 6.5)
    pose, rate = path(0.2)
    assert np.array_equal(pose, [0.0, 0.0, 0.2]) and np.array_equal(rate, np.zeros(3))
    pose, rate = path(3.0)
    assert np.allclose(pose, [1.5, 2.0, 0.2]) and np.allclose(rate, [0.6, 0.8, 0.0])
    pose, _ = path(6.4)
    assert np.allclose(pose[:2], [3.0, 4.0])
    with pytest.raises(ConfigurationError):
        PosePath(((0.0, 0.0),), 1.0)


def test_circle_path_rate_is_derivative():
    path = CirclePath(radius=8.0, period=20.0)
    for t in (0.0, 3.3, 11.0):
        h = 1e-6
        fd = (path(t + h)[0] - path(t - h)[0]) / (2 * h)
        assert np.allclose(path(t)[1], fd, atol=1e-7)


def test_far_from_obstacles_filter_is_idle(rig, obstacles):
    path = PosePath(((4.0, 6.0), (6.0, 4.0)), speed=2.0, theta_ref=0.785, hold_start=0.2, hold_end=0.2)
    devs = []
    trace = run_suturing_scenario(rig, path, obstacles, SutureConfig(), x0=[4.0, 6.0, 0.785],
                                  on_step=lambda t, d: devs.append(d.deviation))
    assert len(devs) == len(trace)
    assert max(devs) == 0.0
    assert np.all(trace["active_obstacle"] == -1)


def test_no_obstacles_uses_reference(rig):
    path = CirclePath(radius=6.0, period=10.0, theta_ref=0.6, turns=0.2)
    seen = []
    trace = run_suturing_scenario(rig, path, None, SutureConfig(),
                                  on_step=lambda t, d: seen.append(np.array_equal(d.u, np.clip(d.u_ref, -4, 4))))
    assert all(seen)
    assert np.all(np.isnan(trace["h_min"]))
    assert trace.columns == ["t", "x", "y", "theta", "I1", "I2", "I3", "I4", "h_min", "ex", "ey", "etheta",
                             "active_obstacle"]
    assert len(trace) == int(round(path.duration / 1e-3)) + 1


def test_short_stitch_segment_stays_safe(rig, obstacles):
    path = stitch_path()
    trace = run_suturing_scenario(rig, path, obstacles, SutureConfig(), sim=SimulatorConfig(t_end=4.0))
    h = trace["h_min"]
    assert np.nanmin(h) >= -1e-3
    assert np.abs(trace.data[:, 4:8]).max() <= 4.0 + 1e-12
    assert not trace.events
