"""Dense strictly convex QP solver with phase-I infeasibility detection.

Problems are stated as::

    minimize    1/2 x^T H x + f^T x
    subject to  A x <= b

and solved with a primal active-set method started from a phase-I witness.
Variables are Jacobi-scaled and constraint rows normalized internally, so
problems whose cost weights span many orders of magnitude (as the
limit-weight CLF-CBF QP does) stay well conditioned.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

SYMMETRY_RTOL = 1e-12
RIDGE_SCALE = 1e-9
FEASIBILITY_RTOL = 1e-8
PHASE_ONE_RIDGE = 1e-10


class QpError(Exception):
    """Base class for solver errors."""


class DimensionMismatchError(QpError, ValueError):
    pass


class QpValidationError(QpError, ValueError):
    pass


class SolverFailure(QpError, RuntimeError):
    """Raised when the active-set loop exceeds its iteration cap."""


class QpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"


def _as_constraints(ineq_matrix, ineq_rhs, n_v):
    if ineq_matrix is None:
        ineq_matrix = np.zeros((0, n_v))
    A = np.atleast_2d(np.asarray(ineq_matrix, dtype=float))
    if A.size == 0:
        A = A.reshape(0, n_v)
    b = np.zeros(0) if ineq_rhs is None else np.asarray(ineq_rhs, dtype=float).reshape(-1)
    if A.shape[1] != n_v:
        raise DimensionMismatchError(
            f"ineq_matrix has {A.shape[1]} columns, expected {n_v}")
    if A.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"ineq_matrix has {A.shape[0]} rows but ineq_rhs has length {b.shape[0]}")
    return A, b


@dataclass(frozen=True)
class QpProblem:
    """minimize 1/2 x^T H x + f^T x subject to A x <= b."""

    hessian: np.ndarray
    linear_cost: np.ndarray
    ineq_matrix: np.ndarray | None = None
    ineq_rhs: np.ndarray | None = None

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        f = np.asarray(self.linear_cost, dtype=float).reshape(-1)
        n_v = f.shape[0]
        if n_v < 1:
            raise DimensionMismatchError("problem needs at least one variable")
        if H.shape != (n_v, n_v):
            raise DimensionMismatchError(
                f"hessian has shape {H.shape}, expected {(n_v, n_v)}")
        scale = max(np.max(np.abs(H)), 1.0)
        if np.max(np.abs(H - H.T)) > SYMMETRY_RTOL * scale:
            raise QpValidationError("hessian is not symmetric")
        A, b = _as_constraints(self.ineq_matrix, self.ineq_rhs, n_v)
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(f))
                and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise QpValidationError("problem data must be finite")
        object.__setattr__(self, "hessian", 0.5 * (H + H.T))
        object.__setattr__(self, "linear_cost", f)
        object.__setattr__(self, "ineq_matrix", A)
        object.__setattr__(self, "ineq_rhs", b)

    @property
    def n_vars(self) -> int:
        return self.linear_cost.shape[0]

    @property
    def n_constraints(self) -> int:
        return self.ineq_rhs.shape[0]

    def objective(self, x) -> float:
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.hessian @ x + self.linear_cost @ x)

    def violation(self, x) -> float:
        """Largest amount by which ``x`` violates a constraint (0 if feasible)."""
        if self.n_constraints == 0:
            return 0.0
        return float(max(0.0, np.max(self.ineq_matrix @ x - self.ineq_rhs)))


@dataclass
class QpSolution:
    status: QpStatus
    x_opt: np.ndarray | None
    objective: float
    active_set: tuple[int, ...] = ()
    kkt_residual: float = float("nan")
    max_violation: float = float("nan")
    multipliers: np.ndarray | None = None
    infeasibility: float = 0.0
    iterations: int = 0
    regularized: bool = False

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


@dataclass
class _ActiveSetResult:
    x: np.ndarray
    working: list = field(default_factory=list)
    multipliers: np.ndarray | None = None
    iterations: int = 0


def feasibility_tolerance(ineq_rhs) -> float:
    b = np.asarray(ineq_rhs, dtype=float)
    bmax = float(np.max(np.abs(b))) if b.size else 0.0
    return FEASIBILITY_RTOL * (1.0 + bmax)


def regularization(hessian) -> float:
    """Ridge added to semidefinite Hessians: 1e-9 * (1 + ||H||_inf)."""
    H = np.asarray(hessian, dtype=float)
    return RIDGE_SCALE * (1.0 + float(np.max(np.sum(np.abs(H), axis=1))))


def _jacobi_scaling(H):
    d = np.diag(H).copy()
    tiny = 1e-300
    d = np.where(d > tiny, 1.0 / np.sqrt(np.maximum(d, tiny)), 1.0)
    return d


def _is_positive_definite(H) -> bool:
    d = _jacobi_scaling(H)
    Hs = H * d[:, None] * d[None, :]
    try:
        L = np.linalg.cholesky(Hs)
    except np.linalg.LinAlgError:
        return False
    # reject matrices that are PD only up to roundoff
    return bool(np.min(np.abs(np.diag(L))) > 1e-7)


def _independent(rows: np.ndarray, candidate: np.ndarray) -> bool:
    if rows.shape[0] == 0:
        return bool(np.linalg.norm(candidate) > 0)
    if rows.shape[0] >= rows.shape[1]:
        return False
    M = np.vstack([rows, candidate])
    s = np.linalg.svd(M, compute_uv=False)
    return bool(s[-1] > 1e-10 * s[0])


def _active_set(G, c, A, b, x0, max_iter, label="qp"):
    """Primal active-set loop on a scaled problem (G positive definite).

    ``x0`` must be feasible up to roundoff. Ties in the add/drop pivots go to
    the lowest constraint index.
    """
    n = G.shape[0]
    m = A.shape[0]
    x = x0.copy()
    working: list[int] = []
    if m:
        # only rows the start point sits exactly on; a row that is merely
        # close would keep its small gap as a permanent offset once working
        residual = b - A @ x
        for i in range(m):
            if residual[i] <= 0.0 and len(working) < n:
                if _independent(A[working], A[i]):
                    working.append(i)

    for it in range(1, max_iter + 1):
        g = G @ x + c
        k = len(working)
        if k:
            # null-space step: p lies exactly in the null space of the
            # working rows, so a full working set yields p = 0
            Q, R = np.linalg.qr(A[working].T, mode="complete")
            Z = Q[:, k:]
            if Z.shape[1]:
                p = Z @ np.linalg.solve(Z.T @ G @ Z, -(Z.T @ g))
            else:
                p = np.zeros(n)
            lam = np.linalg.solve(R[:k, :k], -(Q[:, :k].T @ (g + G @ p)))
        else:
            p = np.linalg.solve(G, -g)
            lam = np.zeros(0)

        if np.abs(p).max() <= 1e-11 * (1.0 + np.abs(x).max() + np.abs(g).max()):
            if k == 0:
                return _ActiveSetResult(x, working, np.zeros(m), it)
            gscale = 1e-10 * (1.0 + np.abs(g).max())
            j = int(np.argmin(lam))
            if lam[j] >= -gscale:
                mult = np.zeros(m)
                mult[working] = np.maximum(lam, 0.0)
                return _ActiveSetResult(x, working, mult, it)
            # most negative multiplier; argmin already breaks ties by the
            # position in the index-sorted working set
            working.pop(j)
            continue

        alpha = 1.0
        blocking = -1
        if m:
            Ap = A @ p
            inactive = np.ones(m, dtype=bool)
            inactive[working] = False
            candidates = np.nonzero(inactive & (Ap > 1e-14 * (1.0 + np.abs(Ap).max())))[0]
            if candidates.size:
                slack = np.maximum(b[candidates] - A[candidates] @ x, 0.0)
                steps = slack / Ap[candidates]
                j = int(np.argmin(steps))
                if steps[j] < 1.0:
                    alpha = float(steps[j])
                    blocking = int(candidates[j])
        x = x + alpha * p
        if blocking >= 0:
            working.append(blocking)
            working.sort()
    raise SolverFailure(f"{label}: active-set iteration cap {max_iter} exceeded")


def _prepare(H, f, A, b):
    """Scale variables to unit curvature and rows to unit norm."""
    d = _jacobi_scaling(H)
    Hs = H * d[:, None] * d[None, :]
    fs = f * d
    As = A * d[None, :]
    norms = np.linalg.norm(As, axis=1) if A.shape[0] else np.zeros(0)
    return d, Hs, fs, As, norms


def _phase_one(A, b, max_iter):
    """Minimize total hinge violation sum_i max(0, a_i x - b_i).

    Solved as a QP in (x, s) with a vanishing ridge; the ridge keeps the
    Hessian positive definite without moving a zero-violation optimum.
    Returns the minimizing x.
    """
    m, n = A.shape
    nv = n + m
    G = PHASE_ONE_RIDGE * np.eye(nv)
    c = np.concatenate([np.zeros(n), np.ones(m)])
    # a_i x - s_i <= b_i ; -s_i <= 0
    Aext = np.zeros((2 * m, nv))
    Aext[:m, :n] = A
    Aext[:m, n:] = -np.eye(m)
    Aext[m:, n:] = -np.eye(m)
    bext = np.concatenate([b, np.zeros(m)])
    z0 = np.concatenate([np.zeros(n), np.maximum(0.0, -b)])

    d, Gs, cs, As, norms = _prepare(G, c, Aext, bext)
    As = As / norms[:, None]
    bs = bext / norms
    res = _active_set(Gs, cs, As, bs, z0 / d, max_iter, label="phase-I")
    return (res.x * d)[:n]


def check_feasibility(ineq_matrix, ineq_rhs):
    """Decide whether {x : A x <= b} is nonempty.

    Returns ``(True, witness)`` with ``A @ witness <= b + tol`` or
    ``(False, violation)`` where ``violation`` is the minimal total hinge
    violation, above ``1e-8 * (1 + ||b||_inf)``.
    """
    A = np.atleast_2d(np.asarray(ineq_matrix, dtype=float))
    b = np.asarray(ineq_rhs, dtype=float).reshape(-1)
    if A.ndim != 2 or A.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"ineq_matrix rows {A.shape[0]} != ineq_rhs length {b.shape[0]}")
    n = A.shape[1]
    if A.shape[0] == 0:
        return True, np.zeros(n)
    tol = feasibility_tolerance(b)
    if np.all(b >= 0.0):
        return True, np.zeros(n)
    x = _phase_one(A, b, 100 * (2 * n + 3 * A.shape[0]))
    violation = _hinge(A, b, x)
    if violation > tol:
        return False, violation
    return True, x


def _hinge(A, b, x) -> float:
    return float(np.sum(np.maximum(0.0, A @ x - b)))


def kkt_residual(problem: QpProblem, x, multipliers) -> float:
    """||H x + f + A^T mu||_inf plus the worst complementarity product."""
    x = np.asarray(x, dtype=float).reshape(-1)
    mu = np.asarray(multipliers, dtype=float).reshape(-1)
    if x.shape[0] != problem.n_vars:
        raise DimensionMismatchError(f"x has length {x.shape[0]}, expected {problem.n_vars}")
    if mu.shape[0] != problem.n_constraints:
        raise DimensionMismatchError(
            f"multipliers have length {mu.shape[0]}, expected {problem.n_constraints}")
    if np.any(mu < 0):
        raise ValueError("multipliers must be nonnegative")
    A, b = problem.ineq_matrix, problem.ineq_rhs
    stationarity = problem.hessian @ x + problem.linear_cost + A.T @ mu
    comp = float(np.max(np.abs(mu * (A @ x - b)))) if mu.size else 0.0
    return float(np.max(np.abs(stationarity))) + comp


def solve_qp(problem: QpProblem, start=None) -> QpSolution:
    """Solve ``problem``; returns Optimal with the unique minimizer or Infeasible.

    Semidefinite Hessians get a ridge of ``regularization(H)``. Deterministic
    for identical inputs. Raises ``SolverFailure`` past ``100 * (n_v + n_c)``
    active-set iterations.

    ``start`` is an optional hint; when its total row violation is within
    the phase-I acceptance tolerance the feasibility search is skipped.
    """
    H = problem.hessian
    f = problem.linear_cost
    A = problem.ineq_matrix
    b = problem.ineq_rhs
    n, m = problem.n_vars, problem.n_constraints

    if start is not None:
        start = np.asarray(start, dtype=float).reshape(-1)
        if start.shape[0] != n:
            raise DimensionMismatchError(f"start has length {start.shape[0]}, expected {n}")
    # The hint is taken only if it satisfies every row outright; the global
    # tolerance scales with the largest rhs and could hide a real violation.
    if start is not None and m and np.all(A @ start <= b):
        feasible, witness = True, start
    else:
        feasible, witness = check_feasibility(A, b)
    if not feasible:
        return QpSolution(QpStatus.INFEASIBLE, None, float("nan"),
                          infeasibility=float(witness))

    regularized = False
    Hr = H
    if not _is_positive_definite(H):
        Hr = H + regularization(H) * np.eye(n)
        regularized = True

    # the witness may violate rows by up to the feasibility tolerance; relax
    # those rows so the active-set loop starts strictly inside its polytope
    b_work = np.maximum(b, A @ witness) if m else b
    keep = np.linalg.norm(A, axis=1) > 0.0 if m else np.zeros(0, dtype=bool)
    idx = np.nonzero(keep)[0]
    d, Gs, cs, As, norms = _prepare(Hr, f, A[idx], b_work[idx])
    if idx.size:
        As = As / norms[:, None]
        bs = b_work[idx] / norms
    else:
        bs = np.zeros(0)
    res = _active_set(Gs, cs, As, bs, witness / d, 100 * (n + m))
    x = res.x * d
    mult = np.zeros(m)
    if idx.size:
        mult[idx] = res.multipliers / norms
    active = tuple(int(idx[i]) for i in res.working)

    reg_problem = problem if not regularized else QpProblem(Hr, f, A, b)
    return QpSolution(
        QpStatus.OPTIMAL,
        x,
        problem.objective(x),
        active_set=active,
        kkt_residual=kkt_residual(reg_problem, x, mult),
        max_violation=problem.violation(x),
        multipliers=mult,
        iterations=res.iterations,
        regularized=regularized,
    )
