"""Continuous algebraic Riccati equation via Newton-Kleinman iteration."""

from __future__ import annotations

import numpy as np
import scipy.linalg


class CareError(ArithmeticError):
    pass


def care_residual(A, B, Q, R, P) -> float:
    """||A^T P + P A - P B R^-1 B^T P + Q||_inf (max absolute entry)."""
    A, B, Q, R, P = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R, P))
    res = A.T @ P + P @ A - P @ B @ np.linalg.solve(R, B.T @ P) + Q
    return float(np.max(np.abs(res)))


def _initial_gain(A, B):
    """A stabilizing gain by Bass's method; zero when A is already Hurwitz."""
    n = A.shape[0]
    if np.max(np.linalg.eigvals(A).real) < 0:
        return np.zeros((B.shape[1], n))
    beta = 1.0 + np.max(np.abs(np.linalg.eigvals(A)))
    As = A + beta * np.eye(n)
    # As Z + Z As^T = 2 B B^T
    Z = scipy.linalg.solve_continuous_lyapunov(As, 2.0 * B @ B.T)
    try:
        return B.T @ np.linalg.inv(Z)
    except np.linalg.LinAlgError as exc:
        raise CareError("(A, B) is not controllable enough for Bass's initial gain") from exc


def solve_care(A, B, Q, R, max_iter: int = 100, tol: float = 1e-13) -> np.ndarray:
    """Stabilizing solution P of A^T P + P A - P B R^-1 B^T P + Q = 0."""
    A, B, Q, R = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R))
    n = A.shape[0]
    if A.shape != (n, n) or B.shape[0] != n or Q.shape != (n, n):
        raise ValueError("inconsistent CARE dimensions")
    if R.shape != (B.shape[1], B.shape[1]):
        raise ValueError("R must be m x m")
    K = _initial_gain(A, B)
    P_prev = None
    for _ in range(max_iter):
        Acl = A - B @ K
        # Acl^T P + P Acl = -(Q + K^T R K)
        P = scipy.linalg.solve_continuous_lyapunov(Acl.T, -(Q + K.T @ R @ K))
        P = 0.5 * (P + P.T)
        K = np.linalg.solve(R, B.T @ P)
        if P_prev is not None and np.max(np.abs(P - P_prev)) <= tol * (1.0 + np.max(np.abs(P))):
            return P
        P_prev = P
    raise CareError(f"Newton-Kleinman did not converge in {max_iter} iterations")
