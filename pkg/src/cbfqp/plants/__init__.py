"""Benchmark plants: adaptive cruise control and the planar double integrator."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

import numpy as np

from ..system import Certificate, ControlAffineSystem
from .acc import AccParams, acc_certificates, acc_collision, acc_system
from .care import CareError, care_residual, solve_care
from .double_integrator import (
    MULTI_OBSTACLES,
    DoubleIntegratorParams,
    Obstacle,
    barrier,
    clearances,
    di_certificates,
    di_collision,
    di_system,
)

GOAL_POSITION_TOL = 0.1
GOAL_SPEED_TOL = 0.1
SETTLE_TOL = 0.1


class PlantKind(enum.Enum):
    ACC = "Acc"
    DOUBLE_INTEGRATOR = "DoubleIntegrator"


@dataclass(frozen=True)
class Plant:
    """A system together with its certificates and run predicates."""

    kind: PlantKind
    params: Any
    system: ControlAffineSystem
    clf: Certificate
    cbfs: tuple

    @property
    def x0(self) -> np.ndarray:
        return np.asarray(self.params.s0, dtype=float)

    def collision(self, s) -> bool:
        if self.kind is PlantKind.ACC:
            return acc_collision(s)
        return di_collision(s, self.params.obstacles)

    def at_goal(self, s) -> bool:
        if self.kind is PlantKind.ACC:
            return abs(s[1] - self.params.v_d) <= SETTLE_TOL
        p_err = np.linalg.norm(np.asarray(s[:2]) - np.asarray(self.params.p_d))
        return bool(p_err <= GOAL_POSITION_TOL and np.linalg.norm(s[2:]) <= GOAL_SPEED_TOL)


def make_plant(kind: PlantKind, params=None) -> Plant:
    kind = PlantKind(kind)
    if kind is PlantKind.ACC:
        params = params or AccParams()
        clf, cbf = acc_certificates(params)
        return Plant(kind, params, acc_system(params), clf, (cbf,))
    params = params or DoubleIntegratorParams()
    clf, cbfs = di_certificates(params)
    return Plant(kind, params, di_system(params), clf, tuple(cbfs))


__all__ = [
    "AccParams", "CareError", "DoubleIntegratorParams", "MULTI_OBSTACLES", "Obstacle",
    "Plant", "PlantKind", "acc_certificates", "acc_collision", "acc_system", "barrier",
    "care_residual", "clearances", "di_certificates", "di_collision", "di_system",
    "make_plant", "solve_care",
]
