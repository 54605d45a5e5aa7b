"""Control-affine systems, CLF/CBF certificates and their constraint rows."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .qp import DimensionMismatchError, check_feasibility


class CertificateKind(enum.Enum):
    LYAPUNOV = "Lyapunov"
    BARRIER = "Barrier"


class Sense(enum.Enum):
    LEQ = "Leq"
    GEQ = "Geq"


@dataclass(frozen=True)
class ControlAffineSystem:
    """x' = f(x) + g(x) u with a polytopic input set {u : A_u u <= b_u}."""

    state_dim: int
    input_dim: int
    drift: Callable[[np.ndarray], np.ndarray]
    input_map: Callable[[np.ndarray], np.ndarray]
    input_polytope: tuple[np.ndarray, np.ndarray]
    nominal_controller: Callable[[np.ndarray], np.ndarray]

    def __post_init__(self):
        A_u = np.atleast_2d(np.asarray(self.input_polytope[0], dtype=float))
        b_u = np.asarray(self.input_polytope[1], dtype=float).reshape(-1)
        if A_u.shape[1] != self.input_dim or A_u.shape[0] != b_u.shape[0]:
            raise DimensionMismatchError(
                f"input polytope has shape {A_u.shape}/{b_u.shape}, input_dim={self.input_dim}")
        feasible, _ = check_feasibility(A_u, b_u)
        if not feasible:
            raise ValueError("input polytope is empty")
        object.__setattr__(self, "input_polytope", (A_u, b_u))

    def _check_state(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.state_dim:
            raise DimensionMismatchError(f"state has length {x.shape[0]}, expected {self.state_dim}")
        return x

    def f(self, x) -> np.ndarray:
        out = np.asarray(self.drift(self._check_state(x)), dtype=float).reshape(-1)
        if out.shape != (self.state_dim,):
            raise DimensionMismatchError(f"drift returned shape {out.shape}")
        return out

    def g(self, x) -> np.ndarray:
        out = np.asarray(self.input_map(self._check_state(x)), dtype=float)
        out = out.reshape(self.state_dim, self.input_dim)
        return out

    def k(self, x) -> np.ndarray:
        return np.asarray(self.nominal_controller(self._check_state(x)), dtype=float).reshape(self.input_dim)

    def dynamics(self, x, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(self.input_dim)
        return self.f(x) + self.g(x) @ u

    def contains_input(self, u, tol=1e-8) -> bool:
        A_u, b_u = self.input_polytope
        return bool(np.all(A_u @ np.asarray(u, dtype=float) <= b_u + tol * (1.0 + np.abs(b_u))))


@dataclass(frozen=True)
class Certificate:
    """A CLF or CBF with an analytic gradient and linear decay rate.

    For a Lyapunov certificate the row is L_f V + L_g V u + rate V <= delta;
    for a barrier it is L_f h + L_g h u + rate h >= delta.
    """

    kind: CertificateKind
    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    decay_rate: float
    label: str = ""

    def __post_init__(self):
        if not self.decay_rate > 0:
            raise ValueError(f"decay_rate must be positive, got {self.decay_rate}")

    @property
    def sense(self) -> Sense:
        return Sense.LEQ if self.kind is CertificateKind.LYAPUNOV else Sense.GEQ

    def __call__(self, x) -> float:
        return float(self.value(np.asarray(x, dtype=float)))

    def grad(self, x) -> np.ndarray:
        return np.asarray(self.gradient(np.asarray(x, dtype=float)), dtype=float).reshape(-1)

    def with_rate(self, rate: float) -> "Certificate":
        return Certificate(self.kind, self.value, self.gradient, rate, self.label)


@dataclass(frozen=True)
class ConstraintRow:
    """coeff_u . u + constant {<=, >=} delta."""

    coeff_u: np.ndarray
    constant: float
    sense: Sense
    slack_index: Optional[int] = None

    def evaluate(self, u) -> float:
        return float(self.coeff_u @ np.asarray(u, dtype=float).reshape(-1) + self.constant)

    def satisfied(self, u, delta=0.0, tol=1e-8) -> bool:
        lhs = self.evaluate(u)
        if self.sense is Sense.LEQ:
            return lhs <= delta + tol
        return lhs >= delta - tol


def lie_derivatives(cert: Certificate, sys: ControlAffineSystem, x):
    """(L_f c(x), L_g c(x)) with L_g returned as a length-m vector."""
    x = sys._check_state(x)
    grad = cert.grad(x)
    if grad.shape[0] != sys.state_dim:
        raise DimensionMismatchError(f"gradient has length {grad.shape[0]}, expected {sys.state_dim}")
    return float(grad @ sys.f(x)), grad @ sys.g(x)


def build_constraint_row(cert: Certificate, sys: ControlAffineSystem, x,
                         slack_index: Optional[int] = None,
                         rate: Optional[float] = None) -> ConstraintRow:
    lf, lg = lie_derivatives(cert, sys, x)
    r = cert.decay_rate if rate is None else rate
    return ConstraintRow(np.asarray(lg, dtype=float), lf + r * cert(x), cert.sense, slack_index)


def verify_gradient(cert: Certificate, x, step: Optional[float] = None) -> float:
    """Max over coordinates of |analytic - central difference| / (1 + |analytic|).

    ``step`` defaults to 1e-5 * (1 + |x_i|) per coordinate.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    analytic = cert.grad(x)
    worst = 0.0
    for i in range(x.shape[0]):
        h = 1e-5 * (1.0 + abs(x[i])) if step is None else step
        if h <= 0:
            raise ValueError("step must be positive")
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        numeric = (cert(xp) - cert(xm)) / (2.0 * h)
        worst = max(worst, abs(analytic[i] - numeric) / (1.0 + abs(analytic[i])))
    return worst
