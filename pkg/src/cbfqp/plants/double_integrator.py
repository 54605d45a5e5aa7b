"""Planar double integrator (point AGV) with circular obstacles.

State s = [x, y, vx, vy], input u = [ax, ay] with |u_i| <= u_max.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..system import Certificate, CertificateKind, ControlAffineSystem
from .care import solve_care


@dataclass(frozen=True)
class Obstacle:
    center: tuple
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("obstacle radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))


MULTI_OBSTACLES = (
    Obstacle((5.0, 3.0), 1.0),
    Obstacle((4.0, 1.0), 1.0),
    Obstacle((9.0, 1.0), 1.0),
    Obstacle((1.0, 4.0), 0.5),
    Obstacle((3.0, 3.0), 0.5),
    Obstacle((6.0, 1.0), 0.3),
)


@dataclass(frozen=True)
class DoubleIntegratorParams:
    s0: tuple = (0.0, 4.0, 0.0, 0.0)
    p_d: tuple = (10.0, 0.0)
    obstacles: tuple = (Obstacle((5.0, 3.0), 2.0),)
    lam: float = 1.0
    gamma: float = 3.0
    H: tuple = ((5.0, 0.0), (0.0, 5.0))
    p: float = 1.0
    omega0: float = 1.0
    p_omega: float = 10.0
    u_max: float = 7.0
    lqr_Q: tuple = ((1.0, 0, 0, 0), (0, 1.0, 0, 0), (0, 0, 1.0, 0), (0, 0, 0, 1.0))
    lqr_R: tuple = ((1.0, 0), (0, 1.0))
    nominal_gain: float = 0.0
    control_hz: float = 50.0

    def __post_init__(self):
        obstacles = tuple(o if isinstance(o, Obstacle) else Obstacle(o[0], o[1])
                          for o in self.obstacles)
        object.__setattr__(self, "obstacles", obstacles)
        for name in ("lam", "gamma", "p", "p_omega", "u_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"DoubleIntegratorParams.{name} must be positive")
        if len(self.s0) != 4 or len(self.p_d) != 2:
            raise ValueError("s0 must have 4 entries and p_d 2 entries")

    @property
    def s_d(self) -> np.ndarray:
        return np.array([self.p_d[0], self.p_d[1], 0.0, 0.0])


A_DI = np.array([[0, 0, 1.0, 0], [0, 0, 0, 1.0], [0, 0, 0, 0], [0, 0, 0, 0]])
B_DI = np.array([[0, 0], [0, 0], [1.0, 0], [0, 1.0]])


def di_system(params: DoubleIntegratorParams = DoubleIntegratorParams()) -> ControlAffineSystem:
    """Nominal controller is u = -nominal_gain * (s - s_d)[2:] (zero by default)."""
    s_d = params.s_d
    gain = params.nominal_gain

    def drift(s):
        return np.array([s[2], s[3], 0.0, 0.0])

    def input_map(s):
        return B_DI

    def nominal(s):
        if gain == 0.0:
            return np.zeros(2)
        return np.clip(-gain * (s - s_d)[2:], -params.u_max, params.u_max)

    A_u = np.vstack([np.eye(2), -np.eye(2)])
    b_u = np.full(4, params.u_max)
    return ControlAffineSystem(4, 2, drift, input_map, (A_u, b_u), nominal)


def barrier(obstacle: Obstacle, gamma: float, label: str = "cbf") -> Certificate:
    """h = |p - p_o|^2 - rho^2 + 2 (p - p_o) . v"""
    c = np.asarray(obstacle.center)
    rho2 = obstacle.radius ** 2

    def h(s):
        d = s[:2] - c
        return float(d @ d - rho2 + 2.0 * d @ s[2:])

    def dh(s):
        d = s[:2] - c
        return np.concatenate([2.0 * d + 2.0 * s[2:], 2.0 * d])

    return Certificate(CertificateKind.BARRIER, h, dh, gamma, label)


def di_certificates(params: DoubleIntegratorParams = DoubleIntegratorParams()):
    """LQR-based CLF and one barrier per obstacle."""
    P = solve_care(A_DI, B_DI, np.asarray(params.lqr_Q, dtype=float),
                   np.asarray(params.lqr_R, dtype=float))
    s_d = params.s_d

    def V(s):
        e = s - s_d
        return float(e @ P @ e)

    def dV(s):
        return 2.0 * P @ (s - s_d)

    clf = Certificate(CertificateKind.LYAPUNOV, V, dV, params.lam, "clf")
    cbfs = [barrier(o, params.gamma, f"cbf{i + 1}") for i, o in enumerate(params.obstacles)]
    return clf, cbfs


def clearances(s, obstacles) -> np.ndarray:
    """|p - p_o| - rho per obstacle; negative inside an obstacle."""
    p = np.asarray(s[:2], dtype=float)
    return np.array([np.linalg.norm(p - np.asarray(o.center)) - o.radius for o in obstacles])


def di_collision(s, obstacles) -> bool:
    return bool(np.any(clearances(s, obstacles) < 0.0))
