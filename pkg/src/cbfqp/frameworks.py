"""CLF-CBF QP control frameworks.

Every solver maps one state to one :class:`ControlResult`. The single-QP
methods (hard, CLF-CBF QP, optimal-decay, unified, limit-weight) trade
stability, safety and input effort inside one cost; the safety-first method
solves a cascade in which the barrier slack is minimized first, then the
Lyapunov slack, then input deviation from the nominal controller.

Barrier arguments accept a single certificate or a sequence of them; with
several barriers each gets its own slack.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .qp import QpProblem, QpStatus, check_feasibility, solve_qp
from .system import (
    Certificate,
    CertificateKind,
    ConstraintRow,
    ControlAffineSystem,
    Sense,
    build_constraint_row,
)

#: weight of the pull toward k(x) in lexicographic stages that do not price u
STAGE_PULL = 1e-9
#: |h| below which optimal-decay falls back to the CLF-CBF QP form
H_ZERO_BRANCH = 1e-10


class Method(enum.Enum):
    HARD = "hard"
    CLF_CBF_QP = "clf-cbf-qp"
    OPTIMAL_DECAY = "optimal-decay"
    SAFETY_FIRST = "safety-first"
    UNIFIED = "unified"
    LIMIT_WEIGHT = "limit-weight"


class SlackDomain(enum.Enum):
    FREE = "Free"
    ZERO = "Zero"


@dataclass(frozen=True, eq=False)
class FrameworkConfig:
    method: Method
    H: np.ndarray
    p: float = 1.0
    p_omega: float = 1.0
    omega0: float = 1.0
    gamma0: Optional[float] = None
    q: float = 1e8
    slack_domain: tuple = (SlackDomain.FREE, SlackDomain.ZERO)
    h_delta: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        H = np.atleast_2d(np.asarray(self.H, dtype=float))
        if H.shape[0] != H.shape[1] or np.max(np.abs(H - H.T)) > 1e-12 * max(1.0, np.max(np.abs(H))):
            raise ValueError("H must be square and symmetric")
        if np.min(np.linalg.eigvalsh(H)) <= 0:
            raise ValueError("H must be positive definite")
        object.__setattr__(self, "H", H)
        for name in ("p", "p_omega", "q"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(self, "slack_domain",
                           tuple(SlackDomain(s) for s in self.slack_domain))
        if self.h_delta is not None:
            hd = tuple(float(v) for v in self.h_delta)
            if len(hd) != 2 or min(hd) <= 0:
                raise ValueError("h_delta must hold two positive diagonal weights")
            object.__setattr__(self, "h_delta", hd)

    def replace(self, **changes) -> "FrameworkConfig":
        fields = dict(method=self.method, H=self.H, p=self.p, p_omega=self.p_omega,
                      omega0=self.omega0, gamma0=self.gamma0, q=self.q,
                      slack_domain=self.slack_domain, h_delta=self.h_delta)
        fields.update(changes)
        return FrameworkConfig(**fields)

    def diag_h_delta(self) -> np.ndarray:
        if self.h_delta is None:
            return np.array([2.0 * self.p, 2.0])
        return np.asarray(self.h_delta)


@dataclass
class ControlResult:
    u: Optional[np.ndarray]
    delta1: float
    delta2: np.ndarray
    status: QpStatus
    method: Method
    stage_diagnostics: list = field(default_factory=list)
    omega: Optional[np.ndarray] = None

    @property
    def optimal(self) -> bool:
        return self.status is QpStatus.OPTIMAL


@dataclass(frozen=True)
class PriorityEntry:
    certificate: Certificate
    weight: float = 1.0
    rate: Optional[float] = None

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("priority weights must be positive")

    @property
    def decay_rate(self) -> float:
        return self.certificate.decay_rate if self.rate is None else self.rate


@dataclass(frozen=True)
class PriorityList:
    """Groups of certificates, highest priority first; input deviation is
    always minimized last."""

    levels: tuple

    def __post_init__(self):
        levels = tuple(tuple(e if isinstance(e, PriorityEntry) else PriorityEntry(e)
                             for e in level) for level in self.levels)
        seen = set()
        for level in levels:
            if not level:
                raise ValueError("priority levels must not be empty")
            for e in level:
                if id(e.certificate) in seen:
                    raise ValueError(f"certificate {e.certificate.label!r} appears twice")
                seen.add(id(e.certificate))
        object.__setattr__(self, "levels", levels)

    def entries(self) -> list:
        return [e for level in self.levels for e in level]


# --------------------------------------------------------------------------
# QP assembly helpers


def _as_list(cbf) -> list:
    if isinstance(cbf, Certificate):
        return [cbf]
    return list(cbf)


def _row_constraint(row: ConstraintRow, n_vars: int, slack_col: Optional[int] = None,
                    fixed: float = 0.0, slack_coeff: float = 1.0):
    """One A-row / b-entry for ``row`` with either a slack column or a fixed slack.

    LEQ: a.u + c <= s   ->   a.u - s <= -c
    GEQ: a.u + c >= s   ->  -a.u + s <=  c

    The row is scaled to unit norm. Certificate rows shrink as V or h
    approach zero, and the solver's absolute feasibility tolerance would
    otherwise swallow them.
    """
    a = np.zeros(n_vars)
    m = row.coeff_u.shape[0]
    sign = 1.0 if row.sense is Sense.LEQ else -1.0
    a[:m] = sign * row.coeff_u
    if slack_col is None:
        b = sign * (fixed - row.constant)
    else:
        a[slack_col] = -sign * slack_coeff
        b = -sign * row.constant
    norm = np.linalg.norm(a)
    if norm > 0.0:
        a, b = a / norm, b / norm
    return a, b


def _input_rows(sys: ControlAffineSystem, n_vars: int):
    A_u, b_u = sys.input_polytope
    A = np.zeros((A_u.shape[0], n_vars))
    A[:, :sys.input_dim] = A_u
    return A, b_u.copy()


def _deviation_cost(H, k, n_vars, scale=1.0):
    """Hessian/linear blocks of scale * 1/2 (u - k)^T H (u - k) and its constant."""
    m = k.shape[0]
    P = np.zeros((n_vars, n_vars))
    P[:m, :m] = scale * H
    f = np.zeros(n_vars)
    f[:m] = -scale * (H @ k)
    return P, f, 0.5 * scale * float(k @ H @ k)


def _start_point(A, b, u0, m):
    """u0 padded with slacks set just inside every row that carries them.

    Only a hint for the solver: it falls back to phase-I if the point misses
    any row.
    """
    z = np.zeros(A.shape[1])
    z[:m] = u0
    rest = b - A[:, :m] @ u0
    for j in range(m, A.shape[1]):
        col = A[:, j]
        lo, hi = -np.inf, np.inf
        for r in np.nonzero(col)[0]:
            bound = rest[r] / col[r]
            margin = 1e-6 * (1.0 + abs(bound))
            if col[r] > 0:
                hi = min(hi, bound - margin)
            else:
                lo = max(lo, bound + margin)
        if lo > hi:
            return None
        z[j] = lo if np.isfinite(lo) else (hi if np.isfinite(hi) else 0.0)
    return z


def _solve(P, f, rows, sys, n_vars, const=0.0, stage="qp", u0=None):
    A_in, b_in = _input_rows(sys, n_vars)
    if rows:
        A = np.vstack([A_in, np.array([r[0] for r in rows])])
        b = np.concatenate([b_in, [r[1] for r in rows]])
    else:
        A, b = A_in, b_in
    start = None
    if u0 is not None:
        start = _start_point(A, b, np.asarray(u0, dtype=float), sys.input_dim)
    sol = solve_qp(QpProblem(P, f, A, b), start=start)
    diag = {
        "stage": stage,
        "status": sol.status.value,
        "objective": sol.objective + const if sol.optimal else float("nan"),
        "active_set": list(sol.active_set),
        "iterations": sol.iterations,
        "kkt_residual": sol.kkt_residual,
        "infeasibility": sol.infeasibility,
    }
    return sol, diag


def _infeasible(method, n_barriers, diags) -> ControlResult:
    return ControlResult(None, float("nan"), np.full(n_barriers, np.nan),
                         QpStatus.INFEASIBLE, method, diags)


# --------------------------------------------------------------------------
# single-QP frameworks


def solve_hard(sys, clf, cbf, cfg: FrameworkConfig, x) -> ControlResult:
    """argmin 1/2 (u-k)^T H (u-k) with unslacked CLF and CBF rows."""
    cbfs = _as_list(cbf)
    m = sys.input_dim
    k = sys.k(x)
    rows = [_row_constraint(build_constraint_row(clf, sys, x), m)]
    rows += [_row_constraint(build_constraint_row(c, sys, x), m) for c in cbfs]
    P, f, const = _deviation_cost(cfg.H, k, m)
    sol, diag = _solve(P, f, rows, sys, m, const, "hard", u0=k)
    if not sol.optimal:
        return _infeasible(Method.HARD, len(cbfs), [diag])
    return ControlResult(sol.x_opt[:m], 0.0, np.zeros(len(cbfs)), sol.status, Method.HARD, [diag])


def solve_clf_cbf_qp(sys, clf, cbf, cfg: FrameworkConfig, x) -> ControlResult:
    """argmin 1/2 (u-k)^T H (u-k) + p delta^2, CLF row slacked, CBF rows hard."""
    cbfs = _as_list(cbf)
    m = sys.input_dim
    n = m + 1
    k = sys.k(x)
    rows = [_row_constraint(build_constraint_row(clf, sys, x), n, slack_col=m)]
    rows += [_row_constraint(build_constraint_row(c, sys, x), n) for c in cbfs]
    P, f, const = _deviation_cost(cfg.H, k, n)
    P[m, m] = 2.0 * cfg.p
    sol, diag = _solve(P, f, rows, sys, n, const, "clf-cbf-qp", u0=k)
    if not sol.optimal:
        return _infeasible(Method.CLF_CBF_QP, len(cbfs), [diag])
    z = sol.x_opt
    return ControlResult(z[:m], float(z[m]), np.zeros(len(cbfs)), sol.status,
                         Method.CLF_CBF_QP, [diag])


def _gamma0(cfg, cert):
    return cfg.gamma0 if cfg.gamma0 is not None else cert.decay_rate / cfg.omega0


def solve_optimal_decay(sys, clf, cbf, cfg: FrameworkConfig, x) -> ControlResult:
    """argmin 1/2 (u-k)^T H (u-k) + p delta^2 + p_omega (omega - omega0)^2
    with barrier rows L_f h + L_g h u + omega gamma0 h >= 0.

    At |h| < 1e-10 the decay multiplier has no effect on feasibility, so
    omega is pinned to omega0 for that barrier.
    """
    cbfs = _as_list(cbf)
    m = sys.input_dim
    k = sys.k(x)
    hs = [c(x) for c in cbfs]
    free = [abs(h) >= H_ZERO_BRANCH for h in hs]
    cols = {}
    n = m + 1
    for i, is_free in enumerate(free):
        if is_free:
            cols[i] = n
            n += 1
    rows = [_row_constraint(build_constraint_row(clf, sys, x), n, slack_col=m)]
    P, f, const = _deviation_cost(cfg.H, k, n)
    P[m, m] = 2.0 * cfg.p
    for i, c in enumerate(cbfs):
        g0 = _gamma0(cfg, c)
        if i in cols:
            # L_f h + L_g h u + omega g0 h >= 0  ->  -L_g h u - g0 h omega <= L_f h
            row = build_constraint_row(c, sys, x, rate=0.0)
            a, b = _row_constraint(row, n, slack_col=cols[i], slack_coeff=-g0 * hs[i])
            rows.append((a, b))
            j = cols[i]
            P[j, j] = 2.0 * cfg.p_omega
            f[j] = -2.0 * cfg.p_omega * cfg.omega0
            const += cfg.p_omega * cfg.omega0 ** 2
        else:
            row = build_constraint_row(c, sys, x, rate=cfg.omega0 * g0)
            rows.append(_row_constraint(row, n))
    sol, diag = _solve(P, f, rows, sys, n, const, "optimal-decay", u0=k)
    if not sol.optimal:
        return _infeasible(Method.OPTIMAL_DECAY, len(cbfs), [diag])
    z = sol.x_opt
    omega = np.array([z[cols[i]] if i in cols else cfg.omega0 for i in range(len(cbfs))])
    delta2 = np.array([(cfg.omega0 - omega[i]) * _gamma0(cfg, c) * hs[i]
                       for i, c in enumerate(cbfs)])
    return ControlResult(z[:m], float(z[m]), delta2, sol.status, Method.OPTIMAL_DECAY,
                         [diag], omega=omega)


def solve_unified(sys, clf, cbf, cfg: FrameworkConfig, x) -> ControlResult:
    """argmin 1/2 [u-k; Delta]^T blkdiag(H, H_Delta) [u-k; Delta] with Delta
    restricted to the configured slack domain (Free or Zero per slack)."""
    cbfs = _as_list(cbf)
    m = sys.input_dim
    k = sys.k(x)
    d1_free = cfg.slack_domain[0] is SlackDomain.FREE
    d2_free = cfg.slack_domain[1] is SlackDomain.FREE
    hd = cfg.diag_h_delta()
    n = m + int(d1_free) + (len(cbfs) if d2_free else 0)
    P, f, const = _deviation_cost(cfg.H, k, n)
    col = m
    rows = []
    if d1_free:
        P[col, col] = hd[0]
        rows.append(_row_constraint(build_constraint_row(clf, sys, x), n, slack_col=col))
        col += 1
    else:
        rows.append(_row_constraint(build_constraint_row(clf, sys, x), n))
    cbf_cols = []
    for c in cbfs:
        if d2_free:
            P[col, col] = hd[1]
            rows.append(_row_constraint(build_constraint_row(c, sys, x), n, slack_col=col))
            cbf_cols.append(col)
            col += 1
        else:
            rows.append(_row_constraint(build_constraint_row(c, sys, x), n))
    sol, diag = _solve(P, f, rows, sys, n, const, "unified", u0=k)
    if not sol.optimal:
        return _infeasible(Method.UNIFIED, len(cbfs), [diag])
    z = sol.x_opt
    delta1 = float(z[m]) if d1_free else 0.0
    delta2 = np.array([z[j] for j in cbf_cols]) if d2_free else np.zeros(len(cbfs))
    return ControlResult(z[:m], delta1, delta2, sol.status, Method.UNIFIED, [diag])


def optimal_decay_weights(cfg: FrameworkConfig, cbf: Certificate, x) -> FrameworkConfig:
    """Unified-QP config that reproduces optimal-decay at a state with h(x) != 0.

    H_Delta = diag(2p, 2 p_omega / (gamma0 h)^2) and both slacks free.
    """
    h = cbf(x)
    g0 = _gamma0(cfg, cbf)
    if abs(h) < H_ZERO_BRANCH:
        raise ValueError("optimal-decay has no unified weights at h(x) = 0")
    p_h = cfg.p_omega / (g0 * h) ** 2
    return cfg.replace(method=Method.UNIFIED, slack_domain=(SlackDomain.FREE, SlackDomain.FREE),
                       h_delta=(2.0 * cfg.p, 2.0 * p_h))


def solve_limit_weight(sys, clf, cbf, cfg: FrameworkConfig, x) -> ControlResult:
    """argmin (u-k)^T H (u-k) + q delta1^2 + q^2 sum delta2^2, solved with the
    cost divided by q^2."""
    cbfs = _as_list(cbf)
    m = sys.input_dim
    n = m + 1 + len(cbfs)
    k = sys.k(x)
    q = cfg.q
    # 1/q^2 * (u-k)^T H (u-k) = 1/2 (u-k)^T (2H/q^2) (u-k)
    P, f, const = _deviation_cost(cfg.H, k, n, scale=2.0 / q**2)
    P[m, m] = 2.0 / q
    rows = [_row_constraint(build_constraint_row(clf, sys, x), n, slack_col=m)]
    for i, c in enumerate(cbfs):
        P[m + 1 + i, m + 1 + i] = 2.0
        rows.append(_row_constraint(build_constraint_row(c, sys, x), n, slack_col=m + 1 + i))
    sol, diag = _solve(P, f, rows, sys, n, const, "limit-weight", u0=k)
    if not sol.optimal:
        return _infeasible(Method.LIMIT_WEIGHT, len(cbfs), [diag])
    z = sol.x_opt
    return ControlResult(z[:m], float(z[m]), np.array(z[m + 1:]), sol.status,
                         Method.LIMIT_WEIGHT, [diag])


# --------------------------------------------------------------------------
# hierarchical frameworks


def _minimal_slacks(sys, x, k, cfg, level_rows, weights, frozen, stage, u0):
    """Minimize sum_j w_j s_j^2 over the slacks of ``level_rows`` subject to the
    frozen rows and the input set. Lower-priority rows are omitted: their
    slacks are still free, so they cannot restrict u."""
    m = sys.input_dim
    n = m + len(level_rows)
    P, f, const = _deviation_cost(cfg.H, k, n, scale=STAGE_PULL)
    rows = [_row_constraint(r, n, fixed=d) for r, d in frozen]
    for j, (r, w) in enumerate(zip(level_rows, weights)):
        P[m + j, m + j] = 2.0 * w
        rows.append(_row_constraint(r, n, slack_col=m + j))
    sol, diag = _solve(P, f, rows, sys, n, const, stage, u0=u0)
    if not sol.optimal:
        # unreachable in exact arithmetic: every level's slacks are free
        raise RuntimeError(f"{stage}: lexicographic stage reported infeasible")
    slacks = np.array(sol.x_opt[m:])
    # the u-pull perturbs slacks by O(STAGE_PULL); snap to the exact zero
    # optimum when the unslacked level is attainable
    if np.any(slacks != 0.0) and np.max(np.abs(slacks)) <= 1e-6 * (1.0 + max(abs(r.constant) for r in level_rows)):
        trial = [(r, 0.0) for r in level_rows]
        A = [_row_constraint(r, m, fixed=d)[0] for r, d in frozen + trial]
        b = [_row_constraint(r, m, fixed=d)[1] for r, d in frozen + trial]
        A_in, b_in = sys.input_polytope
        ok, _ = check_feasibility(np.vstack([A_in] + [np.atleast_2d(a) for a in A]),
                                  np.concatenate([b_in, b]))
        if ok:
            slacks = np.zeros_like(slacks)
    return slacks, sol.x_opt[:m], diag


def _final_stage(sys, x, k, cfg, frozen, diags, u0):
    m = sys.input_dim
    P, f, const = _deviation_cost(cfg.H, k, m)
    rows = [_row_constraint(r, m, fixed=d) for r, d in frozen]
    sol, diag = _solve(P, f, rows, sys, m, const, "input", u0=u0)
    diags.append(diag)
    if not sol.optimal:
        raise RuntimeError("input stage reported infeasible after slack stages")
    return sol.x_opt[:m]


def solve_safety_first(sys, clf, cbf, cfg: FrameworkConfig, x) -> ControlResult:
    """Three nested QPs: barrier slack, then Lyapunov slack, then input deviation.

    Always returns Optimal; with several barriers they share the first level.
    """
    cbfs = _as_list(cbf)
    k = sys.k(x)
    cbf_rows = [build_constraint_row(c, sys, x) for c in cbfs]
    clf_row = build_constraint_row(clf, sys, x)
    diags = []

    d2, u, diag = _minimal_slacks(sys, x, k, cfg, cbf_rows, [1.0] * len(cbfs), [],
                                  "barrier-slack", k)
    diags.append(diag)
    frozen = list(zip(cbf_rows, d2))

    d1, u, diag = _minimal_slacks(sys, x, k, cfg, [clf_row], [1.0], frozen,
                                  "lyapunov-slack", u)
    diags.append(diag)
    frozen.append((clf_row, float(d1[0])))

    u = _final_stage(sys, x, k, cfg, frozen, diags, u)
    return ControlResult(u, float(d1[0]), d2, QpStatus.OPTIMAL, Method.SAFETY_FIRST, diags)


def solve_priority_list(sys, plist: PriorityList, cfg: FrameworkConfig, x) -> ControlResult:
    """k + 1 nested QPs over a priority list of certificates.

    ``delta1`` reports the first Lyapunov entry's slack and ``delta2`` the
    barrier slacks in the order they appear in ``plist``.
    """
    k = sys.k(x)
    frozen = []
    diags = []
    slack_of = {}
    u = k
    for i, level in enumerate(plist.levels):
        rows = [build_constraint_row(e.certificate, sys, x, rate=e.decay_rate) for e in level]
        slacks, u, diag = _minimal_slacks(sys, x, k, cfg, rows, [e.weight for e in level],
                                          frozen, f"level-{len(plist.levels) - i}", u)
        diags.append(diag)
        for e, r, s in zip(level, rows, slacks):
            frozen.append((r, float(s)))
            slack_of[id(e.certificate)] = float(s)
    entries = plist.entries()
    barriers = [e for e in entries if e.certificate.kind is CertificateKind.BARRIER]
    lyap = [e for e in entries if e.certificate.kind is CertificateKind.LYAPUNOV]
    u = _final_stage(sys, x, k, cfg, frozen, diags, u)
    delta1 = slack_of[id(lyap[0].certificate)] if lyap else 0.0
    delta2 = np.array([slack_of[id(e.certificate)] for e in barriers])
    return ControlResult(u, delta1, delta2, QpStatus.OPTIMAL, Method.SAFETY_FIRST, diags)


def barrier_priority_order(cbfs: Sequence[Certificate], x) -> list:
    """Barrier indices sorted by ascending h(x); ties keep the given order."""
    values = [c(x) for c in cbfs]
    return sorted(range(len(cbfs)), key=lambda i: (values[i], i))


def ascending_h_priority_list(clf, cbfs: Sequence[Certificate], x):
    """One level per barrier, lowest h first, with the CLF below all barriers.

    Returns the list and the barrier order used.
    """
    order = barrier_priority_order(cbfs, x)
    levels = [(PriorityEntry(cbfs[i]),) for i in order] + [(PriorityEntry(clf),)]
    return PriorityList(tuple(levels)), order


# --------------------------------------------------------------------------
# standardized (SU) form


@dataclass(frozen=True, eq=False)
class StandardizedQp:
    """Unified QP rewritten in v = S (u - k(x)), eps = S_Delta Delta."""

    problem: QpProblem
    S: np.ndarray
    S_inv: np.ndarray
    S_delta: np.ndarray
    nominal: np.ndarray
    free: tuple

    def to_u(self, v) -> np.ndarray:
        return self.S_inv @ np.asarray(v, dtype=float) + self.nominal

    def to_v(self, u) -> np.ndarray:
        return self.S @ (np.asarray(u, dtype=float) - self.nominal)


def symmetric_factor(H) -> np.ndarray:
    """Symmetric S with S^T S = H."""
    w, Q = np.linalg.eigh(np.asarray(H, dtype=float))
    if np.min(w) <= 0:
        raise ValueError("H must be positive definite to standardize")
    return (Q * np.sqrt(w)) @ Q.T


def standardize(sys, clf, cbf, cfg: FrameworkConfig, x) -> StandardizedQp:
    """SU form of the unified QP: minimize 1/2 (v^T v + eps^T eps)."""
    cbfs = _as_list(cbf)
    m = sys.input_dim
    k = sys.k(x)
    S = symmetric_factor(cfg.H)
    S_inv = np.linalg.inv(S)
    hd = cfg.diag_h_delta()
    p1, p2 = np.sqrt(hd)
    d1_free = cfg.slack_domain[0] is SlackDomain.FREE
    d2_free = cfg.slack_domain[1] is SlackDomain.FREE
    n = m + int(d1_free) + (len(cbfs) if d2_free else 0)

    def star(row):
        # L_f* = L_f + L_g k, L_g* = L_g S^-1
        return ConstraintRow(row.coeff_u @ S_inv, row.constant + row.coeff_u @ k, row.sense)

    rows = []
    col = m
    clf_row = star(build_constraint_row(clf, sys, x))
    if d1_free:
        rows.append(_row_constraint(clf_row, n, slack_col=col, slack_coeff=1.0 / p1))
        col += 1
    else:
        rows.append(_row_constraint(clf_row, n))
    for c in cbfs:
        r = star(build_constraint_row(c, sys, x))
        if d2_free:
            rows.append(_row_constraint(r, n, slack_col=col, slack_coeff=1.0 / p2))
            col += 1
        else:
            rows.append(_row_constraint(r, n))
    A_u, b_u = sys.input_polytope
    A_in = np.zeros((A_u.shape[0], n))
    A_in[:, :m] = A_u @ S_inv
    b_in = b_u - A_u @ k
    A = np.vstack([A_in, np.array([r[0] for r in rows])])
    b = np.concatenate([b_in, [r[1] for r in rows]])
    problem = QpProblem(np.eye(n), np.zeros(n), A, b)
    return StandardizedQp(problem, S, S_inv, np.diag([p1, p2]), k, (d1_free, d2_free))


# --------------------------------------------------------------------------


_SOLVERS = {
    Method.HARD: solve_hard,
    Method.CLF_CBF_QP: solve_clf_cbf_qp,
    Method.OPTIMAL_DECAY: solve_optimal_decay,
    Method.SAFETY_FIRST: solve_safety_first,
    Method.UNIFIED: solve_unified,
    Method.LIMIT_WEIGHT: solve_limit_weight,
}


def solve(sys, clf, cbfs, cfg: FrameworkConfig, x) -> ControlResult:
    """Dispatch on ``cfg.method``.

    Safety-first with several barriers runs the priority-list cascade with one
    level per barrier ordered by ascending h(x); slacks come back in the
    original barrier order.
    """
    cbfs = _as_list(cbfs)
    if cfg.method is Method.SAFETY_FIRST and len(cbfs) > 1:
        plist, order = ascending_h_priority_list(clf, cbfs, x)
        res = solve_priority_list(sys, plist, cfg, x)
        delta2 = np.empty(len(cbfs))
        delta2[order] = res.delta2
        res.delta2 = delta2
        return res
    return _SOLVERS[cfg.method](sys, clf, cbfs, cfg, x)
