"""Fixed-step closed-loop simulation with zero-order-hold control."""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .frameworks import ControlResult, FrameworkConfig, solve
from .qp import QpError, QpProblem, QpStatus, solve_qp
from .system import Certificate, ControlAffineSystem


class Integrator(enum.Enum):
    EULER = "Euler"
    RK4 = "RK4"


class SimulationError(ArithmeticError):
    """Raised when the state stops being finite."""


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1.0 / 50.0
    horizon: float = 20.0
    integrator: Integrator = Integrator.RK4
    stop_at_goal: bool = False
    stop_on_collision: bool = False

    def __post_init__(self):
        object.__setattr__(self, "integrator", Integrator(self.integrator))
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if not self.horizon >= self.dt:
            raise ValueError("horizon must be at least one step")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.dt))


@dataclass
class TrajectoryLog:
    """One row per control step; ``states[i]`` is the state at which ``inputs[i]``
    was computed. The state after the last step is ``final_state``."""

    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    V: np.ndarray
    h: np.ndarray
    delta1: np.ndarray
    delta2: np.ndarray
    status: list
    method: str
    final_state: np.ndarray
    dt: float
    metadata: dict = field(default_factory=dict)
    aborted: Optional[str] = None

    def __len__(self) -> int:
        return len(self.t)

    @property
    def final_time(self) -> float:
        return len(self.t) * self.dt

    def all_states(self) -> np.ndarray:
        """Logged states followed by the final state."""
        return np.vstack([self.states.reshape(len(self.t), -1), self.final_state[None, :]])

    def all_times(self) -> np.ndarray:
        return np.arange(len(self.t) + 1) * self.dt


def integrate_step(sys: ControlAffineSystem, x, u, dt: float,
                   integrator: Integrator = Integrator.RK4) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    rhs = sys.dynamics
    if Integrator(integrator) is Integrator.EULER:
        x_next = x + dt * rhs(x, u)
    else:
        k1 = rhs(x, u)
        k2 = rhs(x + 0.5 * dt * k1, u)
        k3 = rhs(x + 0.5 * dt * k2, u)
        k4 = rhs(x + dt * k3, u)
        x_next = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(x_next)):
        raise SimulationError(f"non-finite state after step: {x_next}")
    return x_next


def project_input(sys: ControlAffineSystem, u) -> np.ndarray:
    """Euclidean projection of u onto the input polytope."""
    u = np.asarray(u, dtype=float)
    if sys.contains_input(u, tol=0.0):
        return u.copy()
    A, b = sys.input_polytope
    sol = solve_qp(QpProblem(np.eye(u.size), -u, A, b))
    return sol.x_opt


def _config_hash(cfg: FrameworkConfig, sim_cfg: SimConfig, x0) -> str:
    payload = {
        "method": cfg.method.value, "H": cfg.H.tolist(), "p": cfg.p,
        "p_omega": cfg.p_omega, "omega0": cfg.omega0, "gamma0": cfg.gamma0, "q": cfg.q,
        "slack_domain": [s.value for s in cfg.slack_domain],
        "h_delta": cfg.h_delta, "dt": sim_cfg.dt, "horizon": sim_cfg.horizon,
        "integrator": sim_cfg.integrator.value, "stop_at_goal": sim_cfg.stop_at_goal,
        "stop_on_collision": sim_cfg.stop_on_collision,
        "x0": [float(v) for v in x0],
    }
    text = json.dumps(payload, sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def simulate(sys: ControlAffineSystem, certificates, framework_cfg: FrameworkConfig,
             sim_cfg: SimConfig, x0, *, goal: Optional[Callable] = None,
             collision: Optional[Callable] = None, scenario: str = "",
             controller: Optional[Callable] = None) -> TrajectoryLog:
    """Run the closed loop from ``x0``.

    ``certificates`` is ``(clf, cbfs)``. Infeasible steps apply the projection
    of k(x) onto the input set and are flagged in ``status``. ``controller``
    replaces the framework dispatch (used for priority-list runs).
    """
    clf, cbfs = certificates
    cbfs = [cbfs] if isinstance(cbfs, Certificate) else list(cbfs)
    if controller is None:
        def controller(x):
            return solve(sys, clf, cbfs, framework_cfg, x)

    x = np.asarray(x0, dtype=float).copy()
    n_steps = sim_cfg.n_steps
    ts, xs, us, Vs, hs, d1s, d2s, status = [], [], [], [], [], [], [], []
    aborted = None
    for i in range(n_steps):
        if sim_cfg.stop_at_goal and goal is not None and goal(x):
            break
        if sim_cfg.stop_on_collision and collision is not None and collision(x):
            break
        try:
            res: ControlResult = controller(x)
        except (QpError, RuntimeError) as exc:
            aborted = f"step {i}: {exc}"
            break
        if res.optimal:
            u = np.asarray(res.u, dtype=float)
            d1, d2 = res.delta1, np.asarray(res.delta2, dtype=float)
        else:
            u = project_input(sys, sys.k(x))
            d1, d2 = float("nan"), np.full(len(cbfs), np.nan)
        ts.append(i * sim_cfg.dt)
        xs.append(x)
        us.append(u)
        Vs.append(clf(x))
        hs.append([c(x) for c in cbfs])
        d1s.append(d1)
        d2s.append(d2)
        status.append(res.status)
        try:
            x = integrate_step(sys, x, u, sim_cfg.dt, sim_cfg.integrator)
        except SimulationError as exc:
            aborted = f"step {i}: {exc}"
            break

    n, m, k = sys.state_dim, sys.input_dim, len(cbfs)
    log = TrajectoryLog(
        t=np.array(ts),
        states=np.array(xs).reshape(-1, n),
        inputs=np.array(us).reshape(-1, m),
        V=np.array(Vs),
        h=np.array(hs).reshape(-1, k),
        delta1=np.array(d1s),
        delta2=np.array(d2s).reshape(-1, k),
        status=status,
        method=framework_cfg.method.value,
        final_state=x,
        dt=sim_cfg.dt,
        metadata={"scenario": scenario,
                  "config_hash": _config_hash(framework_cfg, sim_cfg, x0)},
        aborted=aborted,
    )
    return log


@dataclass
class RunMetrics:
    min_h: list
    infeasible_step_count: int
    collision: bool
    terminal_V: float
    steps: int
    first_infeasible_time: Optional[float] = None
    first_collision_time: Optional[float] = None
    time_to_goal: Optional[float] = None
    settling_time: Optional[float] = None
    min_clearance: Optional[list] = None
    aborted: Optional[str] = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def compute_metrics(log: TrajectoryLog, plant) -> RunMetrics:
    """Extract run metrics; ``plant`` supplies the collision and goal predicates.

    Predicates are evaluated on the logged states plus the final state, so a
    collision caused by the last step is still seen. ``settling_time`` is the
    first time |v - v_d| <= 0.1 (ACC only).
    """
    from .plants import PlantKind, clearances

    if len(log) == 0:
        raise ValueError("empty trajectory log")
    states = log.all_states()
    times = log.all_times()
    dt = log.dt
    infeasible = [i for i, s in enumerate(log.status) if s is QpStatus.INFEASIBLE]
    hits = [i for i, s in enumerate(states) if plant.collision(s)]
    goals = [i for i, s in enumerate(states) if plant.at_goal(s)]
    cbfs = plant.cbfs
    h_all = np.array([[c(s) for c in cbfs] for s in states])
    metrics = RunMetrics(
        min_h=[float(v) for v in h_all.min(axis=0)],
        infeasible_step_count=len(infeasible),
        collision=bool(hits),
        terminal_V=float(plant.clf(states[-1])),
        steps=len(log),
        first_infeasible_time=infeasible[0] * dt if infeasible else None,
        first_collision_time=float(times[hits[0]]) if hits else None,
        aborted=log.aborted,
    )
    if plant.kind is PlantKind.ACC:
        metrics.settling_time = float(times[goals[0]]) if goals else None
    else:
        metrics.time_to_goal = float(times[goals[0]]) if goals else None
        clear = np.array([clearances(s, plant.params.obstacles) for s in states])
        metrics.min_clearance = [float(v) for v in clear.min(axis=0)]
    return metrics
