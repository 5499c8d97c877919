import numpy as np
import pytest

from singularity_cbf.arm import (ArmParameters, ArmScenario, analytic_eigenvalues, analytic_lambda1_gradient,
                                 arm_model, forward_kinematics, jacobian, reference_controller, run_arm_scenario)
from singularity_cbf.dynamics import SimulatorConfig, finite_difference_jacobian
from singularity_cbf.errors import ConfigurationError, UnsupportedParameters
from singularity_cbf.singularity import gram_matrix, jacobi_eigh

P = ArmParameters()


def test_forward_kinematics_examples():
    assert np.allclose(forward_kinematics(P, [0.0, 0.0]), [2.0, 0.0], atol=1e-15)
    assert np.allclose(forward_kinematics(P, [np.pi / 2, 0.0]), [0.0, 2.0], atol=1e-15)
    assert np.allclose(forward_kinematics(P, [0.0, np.pi / 2]), [1.0, 1.0], atol=1e-15)


def test_jacobian_examples():
    assert np.allclose(jacobian(P, [0.0, np.pi / 2]), [[-1.0, -1.0], [1.0, 0.0]], atol=1e-15)
    J0 = jacobian(P, [0.0, 0.0])
    assert np.allclose(J0, [[0.0, 0.0], [2.0, 1.0]], atol=1e-15)
    assert abs(np.linalg.det(J0)) < 1e-15


def test_jacobian_matches_fd(rng):
    p = ArmParameters(l1=0.8, l2=1.4)
    for q in rng.uniform(-np.pi, np.pi, (100, 2)):
        fd = finite_difference_jacobian(lambda x: forward_kinematics(p, x), q)
        assert np.allclose(jacobian(p, q), fd, atol=1e-6)


def test_analytic_eigenvalue_examples():
    assert np.allclose(analytic_eigenvalues(0.0), (0.0, 5.0), atol=1e-15)
    assert np.allclose(analytic_eigenvalues(np.pi), (0.0, 1.0), atol=1e-15)
    assert np.allclose(analytic_eigenvalues(np.pi / 2), (0.381966, 2.618034), atol=1e-6)


def test_analytic_eigenvalues_vs_numeric(rng):
    for q2 in rng.uniform(-np.pi, 3 * np.pi, 1000):
        l1, l2 = analytic_eigenvalues(q2)
        J = jacobian(P, [0.37, q2])
        w, _ = jacobi_eigh(gram_matrix(J))
        assert np.allclose((l1, l2), w, atol=1e-9)
        assert l2 >= l1 >= -1e-15
        M = J @ J.T
        assert abs(l1 * l2 - np.linalg.det(J) ** 2) < 1e-9
        assert abs(l1 + l2 - np.trace(M)) < 1e-9


def test_eigenvalues_do_not_depend_on_q1(rng):
    for q2 in rng.uniform(0, 2 * np.pi, 20):
        ws = [jacobi_eigh(gram_matrix(jacobian(P, [q1, q2])))[0] for q1 in np.linspace(-np.pi, np.pi, 9)]
        assert np.abs(np.array(ws) - ws[0]).max() < 1e-12


def test_gradient_examples_and_fd():
    assert abs(analytic_lambda1_gradient(2 * np.pi / 3)) < 1e-12
    assert np.isclose(analytic_lambda1_gradient(np.pi / 2), -1 + 3 / np.sqrt(5), atol=1e-12)
    q2 = np.linspace(0.05, 2 * np.pi - 0.05, 2000)
    h = 1e-6
    fd = (analytic_eigenvalues(q2 + h)[0] - analytic_eigenvalues(q2 - h)[0]) / (2 * h)
    assert np.abs(analytic_lambda1_gradient(q2) - fd).max() < 1e-6
    # radicand stays positive, so the expression is defined everywhere
    c = np.cos(np.linspace(0, 2 * np.pi, 10001))
    # minimum is 0.5 at cos q2 = -3/4
    assert (12 * c + 8 * c * c + 5).min() >= 0.5 - 1e-12


def test_closed_forms_need_unit_links():
    with pytest.raises(UnsupportedParameters):
        analytic_eigenvalues(0.3, ArmParameters(l1=2.0))
    with pytest.raises(UnsupportedParameters):
        analytic_lambda1_gradient(0.3, ArmParameters(l2=0.5))
    assert arm_model(ArmParameters(l1=2.0)).eigenvalue_gradient is None


def test_parameters_validated():
    for bad in ({"l1": 0.0}, {"Kp": -1.0}, {"epsilon": 0.0}):
        with pytest.raises(ConfigurationError):
            ArmParameters(**bad)


def test_reference_controller_examples():
    q = np.array([0.3, 1.1])
    assert np.allclose(reference_controller(P, q, forward_kinematics(P, q)), 0.0)
    p1 = ArmParameters(Kp=1.0)
    q = np.array([0.0, np.pi / 2])
    z_d = forward_kinematics(p1, q) + np.array([0.0, 1.0])
    assert np.allclose(reference_controller(p1, q, z_d), [1.0, -1.0], atol=1e-12)


def test_reference_controller_at_singularity():
    q = np.array([0.0, 0.0])
    u = reference_controller(P, q, [0.5, 1.5])
    assert np.all(np.isfinite(u))
    J = jacobian(P, q)
    # row space of J is spanned by (2, 1)
    row = J[1] / np.linalg.norm(J[1])
    assert np.linalg.norm(u - (u @ row) * row) < 1e-12


def test_scenario_validation():
    with pytest.raises(ConfigurationError):
        ArmScenario(waypoints=((3.0, 0.0),), switch_times=()).validate(P)
    with pytest.raises(ConfigurationError):
        ArmScenario(waypoints=((1.0, 0.0), (0.0, 1.0)), switch_times=()).validate(P)
    ArmScenario().validate(P)


def test_target_switch():
    sc = ArmScenario()
    assert np.allclose(sc.target(4.999), [np.sqrt(2), np.sqrt(2)])
    assert np.allclose(sc.target(5.0), [0.5, 1.2])


def test_waypoint_at_start_stays_put():
    q0 = (np.pi / 4, np.pi / 2)
    z0 = tuple(forward_kinematics(P, q0))
    for cbf in (False, True):
        trace = run_arm_scenario(P, ArmScenario(waypoints=(z0,), switch_times=(), cbf_enabled=cbf, q0=q0),
                                 SimulatorConfig(t_end=0.5))
        assert np.abs(trace["u1"]).max() < 1e-12 and np.abs(trace["u2"]).max() < 1e-12
        assert np.allclose(trace["q1"], q0[0]) and np.allclose(trace["q2"], q0[1])


def test_log_layout(arm_runs):
    trace = arm_runs[True]
    assert trace.columns == ["t", "q1", "q2", "u1", "u2", "lambda1", "h", "ex", "ey", "active"]
    assert len(trace) == 10001
    assert np.all(np.diff(trace.t) > 0)


def test_no_cbf_run_spikes(arm_runs):
    trace = arm_runs[False]
    speed = np.hypot(trace["u1"], trace["u2"])
    assert trace["lambda1"].min() < 0.01
    assert speed.max() >= 10 * np.median(speed)


def test_cbf_run_keeps_margin(arm_runs):
    trace = arm_runs[True]
    assert trace["lambda1"].min() >= P.epsilon - 1e-3
    assert trace["h"].min() >= -1e-3
    assert trace["active"].max() == 1
    assert np.hypot(trace["u1"], trace["u2"]).max() < 5.0
