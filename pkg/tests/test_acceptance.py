"""Acceptance criteria 1-11, one test each.

Each test prints ``criterion N: PASS|FAIL <detail>``; the lines are repeated
in the pytest terminal summary. Simulations shared between criteria are
cached per session.
"""

import functools
import math
import time

import numpy as np
import pytest
from scipy.optimize import linprog

from cbfqp.frameworks import (
    FrameworkConfig,
    Method,
    SlackDomain,
    optimal_decay_weights,
    solve_clf_cbf_qp,
    solve_hard,
    solve_limit_weight,
    solve_optimal_decay,
    solve_safety_first,
    solve_unified,
    standardize,
)
from cbfqp.plants import (
    MULTI_OBSTACLES,
    AccParams,
    DoubleIntegratorParams,
    make_plant,
    solve_care,
)
from cbfqp.plants.care import care_residual
from cbfqp.plants.double_integrator import A_DI, B_DI
from cbfqp.qp import QpProblem, QpStatus, check_feasibility, feasibility_tolerance, solve_qp
from cbfqp.scenarios import builtin
from cbfqp.sim import compute_metrics, simulate
from cbfqp.system import verify_gradient

from conftest import ACCEPTANCE_LINES

THREE = ("clf-cbf-qp", "optimal-decay", "safety-first")
INF = math.inf


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


@functools.lru_cache(maxsize=None)
def run(scenario_id, label, sweep=None):
    """(log, metrics, plant, cfg, seconds) for one built-in run."""
    spec = builtin(scenario_id)
    plant = spec.make_plant()
    mspec = next(m for m in spec.methods if m.label == label)
    cfg = spec.framework_config(mspec, plant, dict(sweep) if sweep else None)
    t0 = time.perf_counter()
    log = simulate(plant.system, (plant.clf, plant.cbfs), cfg, spec.sim, plant.x0,
                   goal=plant.at_goal, collision=plant.collision, scenario=scenario_id)
    elapsed = time.perf_counter() - t0
    return log, compute_metrics(log, plant), plant, cfg, elapsed


def _or_inf(v):
    return INF if v is None else v


def _fmt(v):
    return "none" if v is None else f"{v:.2f}"


# ---------------------------------------------------------------------------


def test_criterion_01_acc_cases_1_and_2():
    problems = []
    details = []
    for case in ("acc-case1", "acc-case2"):
        t_case = 0.0
        settle = {}
        for label in THREE:
            _, mt, _, _, sec = run(case, label)
            t_case += sec
            settle[label] = mt.settling_time
            if mt.infeasible_step_count:
                problems.append(f"{case}/{label} infeasible steps {mt.infeasible_step_count}")
            if mt.min_h[0] < -1e-3:
                problems.append(f"{case}/{label} min h {mt.min_h[0]:.3g}")
            if mt.settling_time is None or mt.settling_time >= 20.0:
                problems.append(f"{case}/{label} never reaches |v-v_d|<=0.1")
        sf = _or_inf(settle["safety-first"])
        if any(sf > _or_inf(settle[m]) for m in THREE[:2]):
            problems.append(f"{case} safety-first not fastest")
        if t_case >= 5.0:
            problems.append(f"{case} runtime {t_case:.2f}s")
        details.append(f"{case} settle " + "/".join(_fmt(settle[m]) for m in THREE)
                       + f" ({t_case:.1f}s)")
    report(1, not problems, "; ".join(details + problems))


def test_criterion_02_acc_case_3():
    _, clf, _, _, _ = run("acc-case3", "clf-cbf-qp")
    _, od, _, _, _ = run("acc-case3", "optimal-decay")
    _, sf, _, _, _ = run("acc-case3", "safety-first")
    t_inf = clf.first_infeasible_time
    ok = (t_inf is not None and 0.0 < t_inf < INF
          and od.infeasible_step_count == 0 and sf.infeasible_step_count == 0)
    report(2, ok, f"clf-cbf-qp first_infeasible_time={t_inf}; infeasible steps "
                  f"optimal-decay={od.infeasible_step_count} safety-first={sf.infeasible_step_count}")


def test_criterion_03_acc_case_4():
    _, od, _, _, _ = run("acc-case4", "optimal-decay")
    log, sf, plant, _, _ = run("acc-case4", "safety-first")
    h = np.array([plant.cbfs[0](s) for s in log.all_states()])
    drops = [i for i in range(len(h) - 1) if h[i] < 0 and h[i + 1] < h[i] - 1e-6]
    ok = od.collision and not sf.collision and sf.infeasible_step_count == 0 and not drops
    report(3, ok, f"optimal-decay collision={od.collision}; safety-first collision={sf.collision}, "
                  f"infeasible={sf.infeasible_step_count}, sub-safety violations={len(drops)}")


def test_criterion_04_convergence_degradation_sweep():
    ps = (2e-3, 2e-2, 2e-1, 2.0)
    sf_log = run("acc-sweep-p", "safety-first")[0]
    gaps = []
    below = 0
    for p in ps:
        log = run("acc-sweep-p", "clf-cbf-qp", (("p", p),))[0]
        V, Vs = log.V, sf_log.V
        assert V.shape == Vs.shape
        below += int(np.sum(V < Vs - 1e-6 * (1.0 + Vs)))
        gaps.append(float(np.max(np.abs(V - Vs))))
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    report(4, below == 0 and decreasing,
           f"sup gaps {', '.join(f'{g:.4g}' for g in gaps)}; steps below safety-first={below}")


def test_criterion_05_agv_setting_a():
    res = {m: run("agv-a", m)[1] for m in THREE}
    clear = {m: min(r.min_clearance) for m, r in res.items()}
    ttg = {m: r.time_to_goal for m, r in res.items()}
    sf = ttg["safety-first"]
    ok = (all(c >= 0 for c in clear.values()) and sf is not None
          and all(sf <= _or_inf(ttg[m]) for m in THREE[:2]))
    report(5, ok, "min clearance " + "/".join(f"{clear[m]:.3f}" for m in THREE)
                  + "; time_to_goal " + "/".join(_fmt(ttg[m]) for m in THREE))


def test_criterion_06_agv_setting_b():
    res = {m: run("agv-b", m)[1] for m in THREE}
    clear = {m: min(r.min_clearance) for m, r in res.items()}
    ttg = {m: r.time_to_goal for m, r in res.items()}
    sf = ttg["safety-first"]
    ok = (clear["optimal-decay"] < 0 and clear["clf-cbf-qp"] >= 0 and clear["safety-first"] >= 0
          and sf is not None and all(sf < _or_inf(ttg[m]) for m in THREE[:2]))
    report(6, ok, "min clearance " + "/".join(f"{clear[m]:.3f}" for m in THREE)
                  + "; time_to_goal " + "/".join(_fmt(ttg[m]) for m in THREE))


def test_criterion_07_agv_multi_obstacle():
    log, mt, plant, _, _ = run("agv-multi", "safety-first")
    assert len(plant.cbfs) == len(MULTI_OBSTACLES)
    ok = not mt.collision and min(mt.min_clearance) >= 0 and mt.time_to_goal is not None
    report(7, ok, f"min clearance {min(mt.min_clearance):.4f}; time_to_goal {_fmt(mt.time_to_goal)} "
                  f"(horizon {builtin('agv-multi').sim.horizon:g}s, final |p-p_d|="
                  f"{np.linalg.norm(log.final_state[:2] - np.array(plant.params.p_d)):.3f})")


def _random_states(kind, rng, count):
    if kind == "Acc":
        return [np.array([0.0, rng.uniform(0, 30), rng.uniform(-20, 150)]) for _ in range(count)]
    return [np.array([rng.uniform(-2, 12), rng.uniform(-3, 6), rng.uniform(-3, 3),
                      rng.uniform(-3, 3)]) for _ in range(count)]


def _rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / (1.0 + np.linalg.norm(b)))


def test_criterion_08_framework_equivalence():
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    worst_u = 0.0
    worst_v = 0.0
    status_mismatch = 0
    compared = 0
    for kind, params in (("Acc", AccParams()), ("DoubleIntegrator", DoubleIntegratorParams())):
        plant = make_plant(kind, params)
        sys, clf, cbfs = plant.system, plant.clf, list(plant.cbfs)
        base = FrameworkConfig(Method.UNIFIED, np.atleast_2d(params.H), p=params.p,
                               p_omega=params.p_omega, omega0=params.omega0)
        settings = [
            (base.replace(slack_domain=(SlackDomain.FREE, SlackDomain.ZERO)), solve_clf_cbf_qp),
            (base.replace(slack_domain=(SlackDomain.ZERO, SlackDomain.ZERO)), solve_hard),
        ]
        for x in _random_states(kind, rng, 200):
            cases = list(settings)
            if abs(cbfs[0](x)) > 1e-10:
                cases.append((optimal_decay_weights(base, cbfs[0], x), solve_optimal_decay))
            for cfg, special in cases:
                a = solve_unified(sys, clf, cbfs, cfg, x)
                b = special(sys, clf, cbfs, base, x)
                if a.status is not b.status:
                    status_mismatch += 1
                    continue
                if not a.optimal:
                    continue
                compared += 1
                worst_u = max(worst_u, _rel(a.u, b.u))
                su = standardize(sys, clf, cbfs, cfg, x)
                sol = solve_qp(su.problem)
                assert sol.optimal
                v = sol.x_opt[:sys.input_dim]
                worst_v = max(worst_v, float(np.max(np.abs(v - su.to_v(a.u)))))
    elapsed = time.perf_counter() - t0
    ok = status_mismatch == 0 and worst_u <= 1e-6 and worst_v <= 1e-8 and elapsed < 10.0
    report(8, ok, f"{compared} optimal pairs, worst rel u diff {worst_u:.2e}, worst |v*-S(u*-k)| "
                  f"{worst_v:.2e}, status mismatches {status_mismatch}, {elapsed:.1f}s")


def _lw_deviation(a, b):
    return max(_rel(a.u, b.u), abs(a.delta1 - b.delta1) / (1.0 + abs(b.delta1)),
               _rel(a.delta2, b.delta2))


def test_criterion_09_limit_weight():
    qs = (1e2, 1e4, 1e6, 1e8)
    worst = 0.0
    non_monotone = 0
    states = 0
    for scenario in ("acc-case1", "agv-a"):
        log, _, plant, cfg, _ = run(scenario, "safety-first")
        sys, clf, cbfs = plant.system, plant.clf, list(plant.cbfs)
        for x in log.states:
            sf = solve_safety_first(sys, clf, cbfs, cfg, x)
            devs = [_lw_deviation(solve_limit_weight(sys, clf, cbfs, cfg.replace(q=q), x), sf)
                    for q in qs]
            worst = max(worst, devs[-1])
            # deviations already at roundoff level are compared with a 1e-12 floor
            non_monotone += int(any(b > a + 1e-12 for a, b in zip(devs, devs[1:])))
            states += 1
    report(9, worst <= 1e-3 and non_monotone == 0,
           f"{states} states, worst relative deviation at q=1e8 {worst:.2e}, "
           f"states with increasing deviation {non_monotone}")


def _grid_argmin(H, f, A, b, step=1e-3):
    """Brute force at resolution ``step``: the 2-D lattice plus every constraint
    line sampled at the same spacing plus all pairwise vertices. A constrained
    optimum lies on a boundary, so the lattice alone can be off by much more
    than one step there."""

    def objective(P):
        return 0.5 * np.einsum("ij,jk,ik->i", P, H, P) + P @ f

    g = np.arange(-1.0, 1.0 + step / 2, step)
    X, Y = np.meshgrid(g, g, indexing="ij")
    pts = [np.column_stack([X.ravel(), Y.ravel()])]
    for a, bi in zip(A, b):
        x0 = a * bi / (a @ a)
        d = np.array([-a[1], a[0]]) / np.linalg.norm(a)
        t = np.arange(-3.0, 3.0 + step / 2, step)
        pts.append(x0 + t[:, None] * d)
    for i in range(len(A)):
        for j in range(i + 1, len(A)):
            M = A[[i, j]]
            if abs(np.linalg.det(M)) > 1e-12:
                pts.append(np.linalg.solve(M, b[[i, j]])[None, :])
    P = np.vstack(pts)
    P = P[np.all(P @ A.T <= b + 1e-12, axis=1)]
    return P[np.argmin(objective(P))]


def _phase_one_oracle(A, b):
    m, n = A.shape
    c = np.concatenate([np.zeros(n), np.ones(m)])
    res = linprog(c, A_ub=np.hstack([A, -np.eye(m)]), b_ub=b,
                  bounds=[(None, None)] * n + [(0, None)] * m, method="highs")
    return res.fun <= feasibility_tolerance(b)


def test_criterion_10_qp_oracles():
    rng = np.random.default_rng(10)
    worst_x = 0.0
    worst_kkt = 0.0
    for _ in range(200):
        Q = np.linalg.qr(rng.normal(size=(2, 2)))[0]
        H = Q @ np.diag(rng.uniform(0.5, 5.0, 2)) @ Q.T
        f = rng.normal(scale=3.0, size=2)
        k = rng.integers(1, 5)
        A = rng.normal(size=(k, 2))
        center = rng.uniform(-0.5, 0.5, 2)
        b = A @ center + rng.uniform(0.05, 1.0, k)
        A = np.vstack([A, np.eye(2), -np.eye(2)])
        b = np.concatenate([b, np.ones(4)])
        sol = solve_qp(QpProblem(H, f, A, b))
        assert sol.optimal
        worst_kkt = max(worst_kkt, sol.kkt_residual)
        worst_x = max(worst_x, float(np.max(np.abs(sol.x_opt - _grid_argmin(H, f, A, b)))))
    disagreements = 0
    infeasible = 0
    for _ in range(200):
        n = int(rng.integers(1, 5))
        m = int(rng.integers(2, 9))
        A = rng.normal(size=(m, n))
        b = rng.normal(size=m)
        ours, _ = check_feasibility(A, b)
        oracle = _phase_one_oracle(A, b)
        status = solve_qp(QpProblem(np.eye(n), np.zeros(n), A, b)).status
        infeasible += int(not oracle)
        disagreements += int(ours != oracle or (status is QpStatus.OPTIMAL) != oracle)
    ok = worst_x <= 2e-3 and worst_kkt <= 1e-6 and disagreements == 0
    report(10, ok, f"worst grid distance {worst_x:.2e}, worst KKT {worst_kkt:.2e}, "
                   f"feasibility disagreements {disagreements}/200 ({infeasible} infeasible)")


def test_criterion_11_gradients_and_care():
    rng = np.random.default_rng(11)
    certs = []
    acc = make_plant("Acc")
    certs += [(acc.clf, "Acc"), (acc.cbfs[0], "Acc")]
    multi = make_plant("DoubleIntegrator", DoubleIntegratorParams(obstacles=MULTI_OBSTACLES))
    single = make_plant("DoubleIntegrator")
    certs += [(c, "DoubleIntegrator") for c in (single.clf, *single.cbfs, *multi.cbfs)]
    worst_grad = 0.0
    for cert, kind in certs:
        for x in _random_states(kind, rng, 100):
            worst_grad = max(worst_grad, verify_gradient(cert, x))
    Q, R = np.eye(4), np.eye(2)
    P = solve_care(A_DI, B_DI, Q, R)
    resid = care_residual(A_DI, B_DI, Q, R, P)
    closed = A_DI - B_DI @ np.linalg.solve(R, B_DI.T @ P)
    max_re = float(np.max(np.linalg.eigvals(closed).real))
    ok = worst_grad <= 1e-5 and resid <= 1e-8 * np.max(np.abs(Q)) and max_re < 0
    report(11, ok, f"worst gradient error {worst_grad:.2e} over {len(certs)} certificates; "
                   f"CARE residual {resid:.2e}, max closed-loop Re(eig) {max_re:.3f}")
