"""Adaptive cruise control: ego vehicle following a lead car at constant speed.

State s = [p, v, z] (ego position, ego speed, gap to the lead vehicle);
input u is the wheel force in newtons.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..system import Certificate, CertificateKind, ControlAffineSystem


@dataclass(frozen=True)
class AccParams:
    m: float = 1650.0
    grav: float = 9.81
    T_h: float = 1.8
    v0: float = 14.0
    v_d: float = 10.0
    f0: float = 0.1
    f1: float = 5.0
    f2: float = 0.25
    c_a: float = 0.3
    c_d: float = 0.3
    lam: float = 5.0
    gamma: float = 5.0
    H: float = 2.0 / 1650.0**2
    p: float = 2e-3
    omega0: float = 1.0
    p_omega: float = 0.2
    s0: tuple = (0.0, 20.0, 100.0)
    control_hz: float = 50.0

    def __post_init__(self):
        for name in ("m", "grav", "T_h", "c_a", "c_d", "lam", "gamma", "H", "p", "p_omega"):
            if not getattr(self, name) > 0:
                raise ValueError(f"AccParams.{name} must be positive")
        if len(self.s0) != 3:
            raise ValueError("AccParams.s0 must have 3 entries [p, v, z]")
        object.__setattr__(self, "s0", tuple(float(v) for v in self.s0))

    def friction(self, v):
        return self.f0 + self.f1 * v + self.f2 * v * v

    @property
    def u_min(self) -> float:
        return -self.m * self.c_d * self.grav

    @property
    def u_max(self) -> float:
        return self.m * self.c_a * self.grav


def acc_system(params: AccParams = AccParams()) -> ControlAffineSystem:
    m = params.m

    def drift(s):
        v = s[1]
        return np.array([v, -params.friction(v) / m, params.v0 - v])

    g_const = np.array([[0.0], [1.0 / m], [0.0]])

    def input_map(s):
        return g_const

    def nominal(s):
        return np.array([params.friction(s[1])])

    polytope = (np.array([[1.0], [-1.0]]), np.array([params.u_max, -params.u_min]))
    return ControlAffineSystem(3, 1, drift, input_map, polytope, nominal)


def acc_certificates(params: AccParams = AccParams()):
    """CLF V = (v - v_d)^2 and CBF h = z - T_h v - (v - v0)^2 / (2 c_d g)."""
    v_d = params.v_d
    brake = params.c_d * params.grav

    def V(s):
        return (s[1] - v_d) ** 2

    def dV(s):
        return np.array([0.0, 2.0 * (s[1] - v_d), 0.0])

    def h(s):
        return s[2] - params.T_h * s[1] - 0.5 * (s[1] - params.v0) ** 2 / brake

    def dh(s):
        return np.array([0.0, -params.T_h - (s[1] - params.v0) / brake, 1.0])

    clf = Certificate(CertificateKind.LYAPUNOV, V, dV, params.lam, "clf")
    cbf = Certificate(CertificateKind.BARRIER, h, dh, params.gamma, "cbf")
    return clf, cbf


def acc_collision(s) -> bool:
    return bool(s[2] <= 0.0)
