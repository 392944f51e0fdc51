"""LPV-MPC lateral controller with standard and exponentially weighted costs.

The incremental prediction model uses the augmented state [x; u_prev], so
that amplitude constraints stay linear in the increments Delta U.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from . import qp
from .envelope import steer_limit
from .lpv import LtiInstance
from .plant import VehicleParams

STANDARD = "standard"
ENHANCED = "enhanced"


class PredictionError(ValueError):
    pass


def _default_x_max():
    # |y_dot| <= 4 m/s and |psi_dot| <= 1 rad/s; psi and y free
    return np.array([4.0, np.inf, 1.0, np.inf])


@dataclass
class MpcConfig:
    N_p: int = 9
    N_c: int | None = None
    Q: np.ndarray = field(default_factory=lambda: np.diag([35.0, 3.25]))
    R: float = 1.25
    beta: float = 3.5
    rho_slack: float = 15.0
    eps_scale: float = 0.5
    T_s: float = 0.1
    du_max: float = math.pi / 12
    du_min: float = -math.pi / 12
    u_max: float = math.pi / 6
    u_min: float = -math.pi / 6
    x_max: np.ndarray = field(default_factory=_default_x_max)
    x_min: np.ndarray | None = None
    cost_mode: str = ENHANCED

    def __post_init__(self):
        if self.N_c is None:
            self.N_c = self.N_p
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        self.x_max = np.asarray(self.x_max, dtype=float)
        self.x_min = -self.x_max if self.x_min is None else np.asarray(self.x_min, dtype=float)
        if not 1 <= self.N_c <= self.N_p:
            raise ValueError("need 1 <= N_c <= N_p")
        if np.any(np.linalg.eigvalsh(self.Q) < -1e-12):
            raise ValueError("Q must be positive semi-definite")
        if not self.R > 0 or not self.rho_slack > 0:
            raise ValueError("R and rho_slack must be positive")
        if self.cost_mode not in (STANDARD, ENHANCED):
            raise ValueError(f"unknown cost_mode {self.cost_mode!r}")
        if self.cost_mode == ENHANCED and not self.beta >= 1:
            raise ValueError("beta must be >= 1 in enhanced mode")

    def with_mode(self, mode: str) -> "MpcConfig":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw["cost_mode"] = mode
        return MpcConfig(**kw)


@dataclass
class Prediction:
    A_aug: np.ndarray
    B_aug: np.ndarray
    C_aug: np.ndarray
    Psi: np.ndarray     # outputs:  Y_p = Psi x0 + Theta dU
    Theta: np.ndarray
    Psi_x: np.ndarray   # augmented states over the horizon
    Theta_x: np.ndarray
    x0: np.ndarray
    N_p: int
    N_c: int

    @property
    def ny(self):
        return self.C_aug.shape[0]

    @property
    def nx(self):
        return self.A_aug.shape[0]

    @property
    def u_prev(self) -> float:
        return float(self.x0[-1])

    def outputs(self, dU):
        return self.Psi @ self.x0 + self.Theta @ np.asarray(dU, dtype=float)

    def states(self, dU):
        return self.Psi_x @ self.x0 + self.Theta_x @ np.asarray(dU, dtype=float)


def build_prediction(lti: LtiInstance, x0, N_p: int, N_c: int) -> Prediction:
    A, B, C = lti.A_d, lti.B_d, lti.C
    nx = A.shape[0]
    if A.shape != (nx, nx) or B.shape[0] != nx or C.shape[1] != nx:
        raise PredictionError("inconsistent A/B/C dimensions")
    if B.shape[1] != 1:
        raise PredictionError("single-input models only")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != nx + 1:
        raise PredictionError(f"augmented state needs {nx + 1} entries, got {x0.size}")
    if not 1 <= N_c <= N_p:
        raise PredictionError("need 1 <= N_c <= N_p")

    na = nx + 1
    A_aug = np.zeros((na, na))
    A_aug[:nx, :nx] = A
    A_aug[:nx, nx:] = B
    A_aug[nx, nx] = 1.0
    B_aug = np.vstack([B, [[1.0]]])
    C_aug = np.hstack([C, np.zeros((C.shape[0], 1))])

    powers = [np.eye(na)]
    for _ in range(N_p):
        powers.append(A_aug @ powers[-1])
    Psi_x = np.vstack([powers[j + 1] for j in range(N_p)])
    Theta_x = np.zeros((N_p * na, N_c))
    for j in range(N_p):
        for i in range(min(j + 1, N_c)):
            Theta_x[j * na:(j + 1) * na, i] = (powers[j - i] @ B_aug).ravel()
    Cbar = np.kron(np.eye(N_p), C_aug)
    return Prediction(A_aug, B_aug, C_aug, Cbar @ Psi_x, Cbar @ Theta_x,
                      Psi_x, Theta_x, x0, N_p, N_c)


def stage_weights(beta: float, n: int) -> np.ndarray:
    """beta^-j for j = 1..n."""
    return beta ** -np.arange(1, n + 1, dtype=float)


def _build_qp(pred: Prediction, Y_r, cfg: MpcConfig, q_w, r_w, soft: bool,
              steer_bound: float | None) -> qp.QpProblem:
    N_p, N_c, na = pred.N_p, pred.N_c, pred.nx
    Y_r = np.asarray(Y_r, dtype=float).reshape(-1)
    if Y_r.size != N_p * pred.ny:
        raise PredictionError(f"Y_r needs {N_p * pred.ny} entries, got {Y_r.size}")
    Qbar = block_diag(*[w * cfg.Q for w in q_w])
    Rbar = np.diag(r_w * cfg.R)
    E = Y_r - pred.Psi @ pred.x0
    H = 2.0 * (pred.Theta.T @ Qbar @ pred.Theta + Rbar)
    f = -2.0 * pred.Theta.T @ Qbar @ E
    H = 0.5 * (H + H.T)

    u_prev = pred.u_prev
    L = np.tril(np.ones((N_c, N_c)))
    I = np.eye(N_c)
    hard_A = [I, -I, L, -L]
    hard_b = [np.full(N_c, cfg.du_max), np.full(N_c, -cfg.du_min),
              np.full(N_c, cfg.u_max - u_prev), np.full(N_c, u_prev - cfg.u_min)]

    soft_A, soft_b = [], []
    bound = cfg.u_max if steer_bound is None else steer_bound
    soft_A += [L, -L]
    soft_b += [np.full(N_c, bound - u_prev), np.full(N_c, bound + u_prev)]
    nx = na - 1
    x_free = pred.Psi_x @ pred.x0
    for j in range(N_p):
        for i in range(nx):
            row = j * na + i
            if np.isfinite(cfg.x_max[i]):
                soft_A.append(pred.Theta_x[row][None, :])
                soft_b.append(np.array([cfg.x_max[i] - x_free[row]]))
            if np.isfinite(cfg.x_min[i]):
                soft_A.append(-pred.Theta_x[row][None, :])
                soft_b.append(np.array([x_free[row] - cfg.x_min[i]]))

    A_hard, b_hard = np.vstack(hard_A), np.concatenate(hard_b)
    A_soft, b_soft = np.vstack(soft_A), np.concatenate(soft_b)
    if not soft:
        return qp.QpProblem(H, f, np.vstack([A_hard, A_soft]), np.concatenate([b_hard, b_soft]))

    n = N_c + 1
    H_e = np.zeros((n, n))
    H_e[:N_c, :N_c] = H
    H_e[N_c, N_c] = 2.0 * cfg.rho_slack
    f_e = np.concatenate([f, [0.0]])
    A_rows = np.vstack([
        np.hstack([A_hard, np.zeros((A_hard.shape[0], 1))]),
        np.hstack([A_soft, np.full((A_soft.shape[0], 1), -cfg.eps_scale)]),
        np.eye(1, n, N_c) * -1.0,
    ])
    b_rows = np.concatenate([b_hard, b_soft, [0.0]])
    return qp.QpProblem(H_e, f_e, A_rows, b_rows)


def build_qp_standard(pred: Prediction, Y_r, cfg: MpcConfig, steer_bound=None) -> qp.QpProblem:
    return _build_qp(pred, Y_r, cfg, np.ones(pred.N_p), np.ones(pred.N_c), False, steer_bound)


def build_qp_enhanced(pred: Prediction, Y_r, cfg: MpcConfig, steer_bound=None) -> qp.QpProblem:
    """Exponentially discounted stage weights plus one slack on state and
    stability rows; actuator rows stay hard."""
    return _build_qp(pred, Y_r, cfg, stage_weights(cfg.beta, pred.N_p),
                     stage_weights(cfg.beta, pred.N_c), True, steer_bound)


@dataclass
class MpcDiagnostics:
    cost: float = float("nan")
    slack: float = 0.0
    active: list = field(default_factory=list)
    iterations: int = 0
    status: str = ""
    fallback: bool = False
    solve_ms: float = 0.0
    du0: float = 0.0
    steer_bound: float = float("nan")


def _cost(pred, Y_r, dU, cfg, q_w, r_w, slack):
    err = (np.asarray(Y_r, dtype=float) - pred.outputs(dU)).reshape(pred.N_p, -1)
    J = sum(w * e @ cfg.Q @ e for w, e in zip(q_w, err))
    J += float(np.sum(r_w * cfg.R * np.asarray(dU) ** 2))
    return float(J + cfg.rho_slack * slack ** 2)


def _slack_feasible_start(problem, cfg, warm_start):
    """Start point for the softened QP: the warm increments when they respect
    the hard rows (else zeros), with the slack just large enough."""
    A, b = problem.A_ineq, problem.b_ineq
    soft = A[:, -1] < 0
    candidates = []
    if warm_start is not None:
        candidates.append(np.asarray(warm_start.z[:cfg.N_c], dtype=float))
    candidates.append(np.zeros(cfg.N_c))
    for dU in candidates:
        resid = A[:, :-1] @ dU - b
        if np.any(resid[~soft] > 0):
            continue
        eps = max(0.0, float(np.max(resid[soft])) / cfg.eps_scale) if soft.any() else 0.0
        return qp.QpSolution(np.append(dU, eps), None, "", 0.0, 0)
    return None


def solve_step(x0, u_prev, Y_r, lti: LtiInstance, cfg: MpcConfig, v_x: float,
               params: VehicleParams, warm_start: qp.QpSolution | None = None):
    """One receding-horizon step. Returns (steering command, diagnostics, QP solution)."""
    tic = time.perf_counter()
    x_aug = np.append(np.asarray(x0, dtype=float), u_prev)
    pred = build_prediction(lti, x_aug, cfg.N_p, cfg.N_c)
    bound = steer_limit(v_x, params, cfg.u_max)
    enhanced = cfg.cost_mode == ENHANCED
    if enhanced:
        problem = build_qp_enhanced(pred, Y_r, cfg, bound)
        q_w, r_w = stage_weights(cfg.beta, cfg.N_p), stage_weights(cfg.beta, cfg.N_c)
    else:
        problem = build_qp_standard(pred, Y_r, cfg, bound)
        q_w, r_w = np.ones(cfg.N_p), np.ones(cfg.N_c)
    if enhanced:
        warm_start = _slack_feasible_start(problem, cfg, warm_start)
    try:
        sol = qp.solve(problem, warm_start)
    except qp.QpError:
        # numerically indefinite Hessian (e.g. Euler blow-up at very low speed)
        sol = qp.QpSolution(np.zeros(problem.n), None, "ill-conditioned", float("inf"), 0)

    diag = MpcDiagnostics(status=sol.status, iterations=sol.iterations, steer_bound=bound)
    if sol.optimal:
        dU = sol.z[:cfg.N_c]
        diag.slack = float(sol.z[-1]) if enhanced else 0.0
        diag.active = list(sol.active)
        diag.du0 = float(dU[0])
        diag.cost = _cost(pred, Y_r, dU, cfg, q_w, r_w, diag.slack)
        cmd = u_prev + dU[0]
    else:
        diag.fallback = True
        cmd = u_prev
    # issued command always honours the hard actuator and stability limits
    cmd = min(max(cmd, u_prev + cfg.du_min), u_prev + cfg.du_max)
    cmd = min(max(cmd, -bound, cfg.u_min), bound, cfg.u_max)
    diag.solve_ms = (time.perf_counter() - tic) * 1e3
    return float(cmd), diag, sol


class LpvMpcController:
    """Keeps the warm start between cycles."""

    def __init__(self, cfg: MpcConfig, params: VehicleParams):
        self.cfg = cfg
        self.params = params
        self._warm = None

    def step(self, x0, u_prev, Y_r, lti, v_x):
        cmd, diag, sol = solve_step(x0, u_prev, Y_r, lti, self.cfg, v_x, self.params,
                                    self._warm)
        self._warm = self._shifted(sol) if sol.optimal else None
        return cmd, diag

    def _shifted(self, sol):
        # shift increments one step forward; the last one repeats as zero
        z = sol.z.copy()
        n = self.cfg.N_c
        z[:n - 1] = sol.z[1:n]
        z[n - 1] = 0.0
        return qp.QpSolution(z, None, "", 0.0, 0, [])
