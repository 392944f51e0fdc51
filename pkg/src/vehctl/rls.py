"""Recursive least squares for per-tire cornering stiffness.

Measurement z = [F_f, F_r], regressor phi' = diag(alpha_f, alpha_r),
parameters theta = [c_f, c_r].
"""
from __future__ import annotations

import math

import numpy as np

from .lpv import STIFFNESS_BOUNDS


class RlsInputError(ValueError):
    pass


class CorneringStiffnessRls:
    def __init__(self, theta0=(80_000.0, 80_000.0), p0: float = 1e6, lam: float = 0.995,
                 dead_band: float = 1e-3, bounds=STIFFNESS_BOUNDS, reset_trace: float = 1e12):
        if not 0 < lam <= 1:
            raise ValueError("forgetting factor must lie in (0, 1]")
        self.theta0 = np.array(theta0, dtype=float)
        self.p0 = float(p0)
        self.lam = float(lam)
        self.dead_band = dead_band
        self.bounds = bounds
        self.reset_trace = reset_trace
        self.reset()

    def reset(self):
        self.theta = self.theta0.copy()
        self.P = self.p0 * np.eye(2)
        self.n_updates = 0
        self.last_error = np.zeros(2)

    def update(self, forces, slips) -> bool:
        """Fold one measurement in. Returns True when the covariance blew up
        and the estimator was reset."""
        z = np.asarray(forces, dtype=float)
        alpha = np.asarray(slips, dtype=float)
        if z.shape != (2,) or alpha.shape != (2,):
            raise RlsInputError("forces and slips must each have two entries")
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(alpha))):
            raise RlsInputError("non-finite RLS input")
        self.last_error = z - alpha * self.theta
        rows = np.flatnonzero(np.abs(alpha) >= self.dead_band)
        if rows.size == 0:
            return False
        # regressor rows for the informative channels only
        Phi_T = np.zeros((rows.size, 2))
        Phi_T[np.arange(rows.size), rows] = alpha[rows]
        e = z[rows] - Phi_T @ self.theta
        S = self.lam * np.eye(rows.size) + Phi_T @ self.P @ Phi_T.T
        K = np.linalg.solve(S, Phi_T @ self.P).T
        self.theta = self.theta + K @ e
        P = (self.P - K @ S @ K.T) / self.lam
        self.P = 0.5 * (P + P.T)
        lo, hi = self.bounds
        self.theta = np.clip(self.theta, lo, hi)
        self.n_updates += 1
        if not math.isfinite(np.trace(self.P)) or np.trace(self.P) > self.reset_trace:
            self.reset()
            return True
        return False

    @property
    def c_f(self) -> float:
        return float(self.theta[0])

    @property
    def c_r(self) -> float:
        return float(self.theta[1])
