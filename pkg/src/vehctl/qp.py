"""Dense convex QP solver for the MPC subproblems.

Solves::

    minimize    0.5 z'Hz + f'z
    subject to  A_ineq z <= b_ineq

with H symmetric positive definite, using a primal active-set method.
A feasible starting point comes from the warm start, from z = 0, or from a
max-margin feasibility LP (HiGHS through scipy) when neither is feasible.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import linprog

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
MAX_ITER = "max_iter"

FEAS_TOL = 1e-9
DUAL_TOL = 1e-11


class QpError(ValueError):
    """Malformed QP (shape mismatch, non-symmetric or indefinite Hessian)."""


@dataclass
class QpProblem:
    H: np.ndarray
    f: np.ndarray
    A_ineq: np.ndarray | None = None
    b_ineq: np.ndarray | None = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        self.f = np.asarray(self.f, dtype=float).reshape(-1)
        n = self.f.size
        if self.H.shape != (n, n):
            raise QpError(f"H has shape {self.H.shape}, expected ({n}, {n})")
        if self.A_ineq is None:
            self.A_ineq = np.zeros((0, n))
            self.b_ineq = np.zeros(0)
        self.A_ineq = np.asarray(self.A_ineq, dtype=float).reshape(-1, n)
        self.b_ineq = np.asarray(self.b_ineq, dtype=float).reshape(-1)
        if self.b_ineq.size != self.A_ineq.shape[0]:
            raise QpError("A_ineq and b_ineq row counts differ")

    @property
    def n(self) -> int:
        return self.f.size

    @property
    def m(self) -> int:
        return self.b_ineq.size

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return float(0.5 * z @ self.H @ z + self.f @ z)

    def max_violation(self, z) -> float:
        if self.m == 0:
            return 0.0
        return float(max(0.0, np.max(self.A_ineq @ z - self.b_ineq)))


@dataclass
class QpSolution:
    z: np.ndarray
    duals: np.ndarray
    status: str
    kkt_residual: float
    iterations: int
    active: list = field(default_factory=list)
    objective: float = float("nan")
    history: list = field(default_factory=list)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def kkt_residuals(problem: QpProblem, z, duals) -> dict:
    """Stationarity, primal/dual feasibility and complementarity residuals."""
    A, b = problem.A_ineq, problem.b_ineq
    grad = problem.H @ z + problem.f + A.T @ duals
    slack = A @ z - b
    return {
        "stationarity": float(np.max(np.abs(grad))) if grad.size else 0.0,
        "primal": float(max(0.0, slack.max())) if slack.size else 0.0,
        "dual": float(max(0.0, -duals.min())) if duals.size else 0.0,
        "complementarity": float(np.max(np.abs(duals * slack))) if slack.size else 0.0,
    }


def _check_hessian(H):
    scale = max(1.0, float(np.max(np.abs(H))))
    if not np.allclose(H, H.T, rtol=0.0, atol=1e-10 * scale):
        raise QpError("Hessian is not symmetric")
    try:
        return cho_factor(H)
    except np.linalg.LinAlgError as exc:
        raise QpError("Hessian is not positive definite") from exc


def _independent_rows(A, candidates, n):
    """Greedy, index-ordered subset of `candidates` with linearly independent rows."""
    chosen = []
    for i in sorted(candidates):
        if len(chosen) >= n:
            break
        trial = A[chosen + [i]]
        if np.linalg.matrix_rank(trial, tol=1e-10) == len(chosen) + 1:
            chosen.append(i)
    return chosen


def _feasible_point(A, b):
    """Max-margin point of {z : Az <= b}; None when the set is empty."""
    m, n = A.shape
    norms = np.linalg.norm(A, axis=1)
    norms[norms == 0.0] = 1.0
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_lp = np.hstack([A, norms[:, None]])
    bounds = [(None, None)] * n + [(None, 1.0)]
    res = linprog(c, A_ub=A_lp, b_ub=b, bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": 1e-10,
                           "dual_feasibility_tolerance": 1e-10})
    if res.status != 0:
        return None
    scale = 1.0 + float(np.max(np.abs(b))) if b.size else 1.0
    if res.x[-1] < -FEAS_TOL * scale:
        return None
    return np.asarray(res.x[:n], dtype=float)


def _initial_working_set(A, b, z, hint=()):
    tight = np.flatnonzero(np.abs(A @ z - b) <= 1e-10 * (1.0 + np.abs(b)))
    tight = set(int(i) for i in tight)
    preferred = [i for i in hint if i in tight]
    rest = [i for i in sorted(tight) if i not in preferred]
    W = _independent_rows(A, preferred, A.shape[1])
    W = _independent_rows(A, W + rest, A.shape[1])
    return sorted(W)


def solve(problem: QpProblem, warm_start: QpSolution | None = None,
          max_iter: int = 500) -> QpSolution:
    """Solve a strictly convex QP with a primal active-set method.

    ``warm_start`` may carry a previous solution; its point and active set
    are reused when the point is still feasible. Ties (entering and leaving
    constraints) are broken by lowest constraint index.
    """
    H, f = problem.H, problem.f
    A, b = problem.A_ineq, problem.b_ineq
    n, m = problem.n, problem.m
    chol = _check_hessian(H)

    if m == 0:
        z = cho_solve(chol, -f)
        res = kkt_residuals(problem, z, np.zeros(0))
        return QpSolution(z, np.zeros(0), OPTIMAL, max(res.values()), 0, [],
                          problem.objective(z), [problem.objective(z)])

    z = None
    hint = ()
    if warm_start is not None and np.shape(warm_start.z) == (n,):
        z_ws = np.asarray(warm_start.z, dtype=float)
        if np.all(np.isfinite(z_ws)) and problem.max_violation(z_ws) <= 1e-10:
            z = z_ws.copy()
            hint = tuple(warm_start.active)
    if z is None:
        z0 = np.zeros(n)
        if problem.max_violation(z0) <= 1e-12:
            z = z0
        else:
            z = _feasible_point(A, b)
            if z is None:
                return QpSolution(np.full(n, np.nan), np.zeros(m), INFEASIBLE,
                                  float("inf"), 0)

    W = _initial_working_set(A, b, z, hint)
    row_norm = np.linalg.norm(A, axis=1)
    history = [problem.objective(z)]
    lam = np.zeros(0)
    status = MAX_ITER
    it = 0
    for it in range(1, max_iter + 1):
        g = H @ z + f
        k = len(W)
        if k:
            Aw = A[W]
            K = np.zeros((n + k, n + k))
            K[:n, :n] = H
            K[:n, n:] = Aw.T
            K[n:, :n] = Aw
            rhs = np.concatenate([-g, b[W] - Aw @ z])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError as exc:
                raise QpError("singular KKT system on the working set") from exc
            p, lam = sol[:n], sol[n:]
        else:
            p = cho_solve(chol, -g)
            lam = np.zeros(0)

        if np.max(np.abs(p)) <= 1e-12 * (1.0 + np.max(np.abs(z))):
            if k == 0 or lam.min() >= -DUAL_TOL:
                status = OPTIMAL
                break
            # most negative multiplier leaves; argmin returns the lowest index
            W.pop(int(np.argmin(lam)))
            continue

        Ap = A @ p
        slack = np.maximum(b - A @ z, 0.0)
        blocking = Ap > 1e-13 * np.max(np.abs(p)) * np.maximum(row_norm, 1.0)
        blocking[W] = False
        ratios = np.full(m, np.inf)
        ratios[blocking] = slack[blocking] / Ap[blocking]
        i = int(np.argmin(ratios))
        alpha = min(1.0, ratios[i])
        z = z + alpha * p
        history.append(problem.objective(z))
        if ratios[i] < 1.0:
            bisect.insort(W, i)

    duals = np.zeros(m)
    if status == OPTIMAL and W:
        duals[W] = np.maximum(lam, 0.0)
    res = kkt_residuals(problem, z, duals)
    return QpSolution(z, duals, status, max(res.values()), it, list(W),
                      problem.objective(z), history)
