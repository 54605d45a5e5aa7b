"""CLF-CBF quadratic-program controllers, including the safety-first hierarchy."""

from .frameworks import (
    ControlResult,
    FrameworkConfig,
    Method,
    PriorityEntry,
    PriorityList,
    SlackDomain,
    solve,
    solve_clf_cbf_qp,
    solve_hard,
    solve_limit_weight,
    solve_optimal_decay,
    solve_priority_list,
    solve_safety_first,
    solve_unified,
    standardize,
)
from .plants import make_plant
from .qp import QpProblem, QpSolution, QpStatus, check_feasibility, kkt_residual, solve_qp
from .sim import SimConfig, TrajectoryLog, compute_metrics, integrate_step, simulate
from .system import Certificate, CertificateKind, ControlAffineSystem, build_constraint_row

__version__ = "0.1.0"
