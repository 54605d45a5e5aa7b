import numpy as np
import pytest

from cbfqp.frameworks import FrameworkConfig, Method
from cbfqp.plants import AccParams, DoubleIntegratorParams, PlantKind, make_plant
from cbfqp.qp import QpStatus
from cbfqp.sim import (
    Integrator,
    SimConfig,
    SimulationError,
    TrajectoryLog,
    compute_metrics,
    integrate_step,
    project_input,
    simulate,
)
from cbfqp.system import Certificate, CertificateKind, ControlAffineSystem, build_constraint_row


@pytest.fixture(scope="module")
def di():
    return make_plant(PlantKind.DOUBLE_INTEGRATOR)


@pytest.fixture(scope="module")
def acc():
    return make_plant(PlantKind.ACC)


def acc_cfg(method):
    p = AccParams()
    return FrameworkConfig(method, [[p.H]], p=p.p, p_omega=p.p_omega, omega0=p.omega0)


def test_integrate_step_examples(di):
    x = np.array([0.0, 0.0, 1.0, 0.0])
    np.testing.assert_allclose(integrate_step(di.system, x, [0, 0], 0.02, Integrator.EULER),
                               [0.02, 0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(integrate_step(di.system, x, [0, 0], 0.02, Integrator.RK4),
                               [0.02, 0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(integrate_step(di.system, x, [1, 0], 0.02),
                               [0.0202, 0, 1.02, 0], atol=1e-14)


def test_integrate_step_errors(di):
    with pytest.raises(ValueError):
        integrate_step(di.system, np.zeros(4), [0, 0], 0.0)
    with pytest.raises(SimulationError):
        integrate_step(di.system, np.array([0, 0, np.inf, 0]), [0, 0], 0.02)


def test_rk4_order_on_acc(acc):
    x0 = np.array([0.0, 20.0, 100.0])

    def run(dt, steps):
        x = x0
        for _ in range(steps):
            x = integrate_step(acc.system, x, [300.0], dt)
        return x

    # coarse steps so truncation error dominates roundoff
    coarse, fine, finer = run(0.5, 20), run(0.25, 40), run(0.125, 80)
    ratio = np.linalg.norm(coarse - fine) / np.linalg.norm(fine - finer)
    assert ratio > 4.0


def test_sim_config_validation():
    with pytest.raises(ValueError):
        SimConfig(dt=0.0)
    with pytest.raises(ValueError):
        SimConfig(dt=0.1, horizon=0.05)
    assert SimConfig(horizon=20.0).n_steps == 1000


def test_zero_dynamics_is_constant():
    sys = ControlAffineSystem(2, 1, lambda x: np.zeros(2), lambda x: np.zeros((2, 1)),
                              ([[1.0], [-1.0]], [1.0, 1.0]), lambda x: np.zeros(1))
    clf = Certificate(CertificateKind.LYAPUNOV, lambda x: float(x @ x), lambda x: 2 * x, 1.0)
    cbf = Certificate(CertificateKind.BARRIER, lambda x: 4.0 - float(x @ x), lambda x: -2 * x, 1.0)
    log = simulate(sys, (clf, [cbf]), FrameworkConfig(Method.SAFETY_FIRST, np.eye(1)),
                   SimConfig(horizon=0.2), [1.0, 0.5])
    assert len(log) == 10
    assert np.all(log.states == [1.0, 0.5])
    assert np.all(log.V == log.V[0]) and np.all(log.h == log.h[0])


def test_simulation_is_deterministic(acc):
    cfg = acc_cfg(Method.SAFETY_FIRST)
    a = simulate(acc.system, (acc.clf, acc.cbfs), cfg, SimConfig(horizon=1.0), acc.x0)
    b = simulate(acc.system, (acc.clf, acc.cbfs), cfg, SimConfig(horizon=1.0), acc.x0)
    assert a.states.tobytes() == b.states.tobytes()
    assert a.inputs.tobytes() == b.inputs.tobytes()
    assert a.metadata == b.metadata
    np.testing.assert_allclose(np.diff(a.t), 0.02)


def test_logged_rows_hold_at_pre_step_state(acc):
    for method in (Method.CLF_CBF_QP, Method.SAFETY_FIRST):
        log = simulate(acc.system, (acc.clf, acc.cbfs), acc_cfg(method),
                       SimConfig(horizon=2.0), acc.x0)
        for x, u, d1, d2, st in zip(log.states, log.inputs, log.delta1, log.delta2, log.status):
            if st is not QpStatus.OPTIMAL:
                continue
            assert build_constraint_row(acc.clf, acc.system, x).evaluate(u) <= d1 + 1e-6
            assert build_constraint_row(acc.cbfs[0], acc.system, x).evaluate(u) >= d2[0] - 1e-6


def test_infeasible_steps_apply_projected_nominal(acc):
    log = simulate(acc.system, (acc.clf, acc.cbfs), acc_cfg(Method.HARD),
                   SimConfig(horizon=0.1), acc.x0)
    assert log.status[0] is QpStatus.INFEASIBLE
    assert np.isnan(log.delta1[0])
    np.testing.assert_allclose(log.inputs[0], acc.system.k(acc.x0))


def test_project_input(di):
    np.testing.assert_allclose(project_input(di.system, [10.0, -1.0]), [7.0, -1.0], atol=1e-9)
    np.testing.assert_array_equal(project_input(di.system, [1.0, 2.0]), [1.0, 2.0])


def test_stop_at_goal(di):
    cfg = FrameworkConfig(Method.SAFETY_FIRST, 5 * np.eye(2))
    goal = make_plant(PlantKind.DOUBLE_INTEGRATOR, DoubleIntegratorParams(s0=(10.0, 0.0, 0.0, 0.0)))
    log = simulate(goal.system, (goal.clf, goal.cbfs), cfg,
                   SimConfig(horizon=1.0, stop_at_goal=True), goal.x0, goal=goal.at_goal)
    assert len(log) == 0


def _synthetic_log(states, status, dt=0.02, k=1):
    n = len(states)
    states = np.asarray(states, dtype=float)
    return TrajectoryLog(t=np.arange(n) * dt, states=states, inputs=np.zeros((n, 1)),
                         V=np.zeros(n), h=np.zeros((n, k)), delta1=np.zeros(n),
                         delta2=np.zeros((n, k)), status=status, method="hard",
                         final_state=states[-1], dt=dt)


def test_metrics_first_infeasible_time(acc):
    p = AccParams()
    # h = z - T_h v - (v - v0)^2 / (2 c_d g) = 5 at v = v0
    z = 5.0 + p.T_h * p.v0
    states = np.tile([0.0, p.v0, z], (1000, 1))
    status = [QpStatus.OPTIMAL] * 40 + [QpStatus.INFEASIBLE] * 960
    m = compute_metrics(_synthetic_log(states, status), acc)
    assert m.first_infeasible_time == pytest.approx(0.80)
    assert m.infeasible_step_count == 960
    assert m.min_h == [pytest.approx(5.0)]
    assert not m.collision


def test_metrics_grazing_collision(di):
    states = [[0.0, 4.0, 0.0, 0.0], [5.0, 3.0 - 1.99, 0.0, 0.0]]
    m = compute_metrics(_synthetic_log(states, [QpStatus.OPTIMAL] * 2), di)
    assert m.collision
    assert m.first_collision_time == pytest.approx(0.02)
    assert m.min_clearance[0] == pytest.approx(-0.01)


def test_metrics_reject_empty_log(acc):
    empty = TrajectoryLog(np.zeros(0), np.zeros((0, 3)), np.zeros((0, 1)), np.zeros(0),
                          np.zeros((0, 1)), np.zeros(0), np.zeros((0, 1)), [], "hard",
                          np.zeros(3), 0.02)
    with pytest.raises(ValueError):
        compute_metrics(empty, acc)
