"""Longitudinal-only closed loop (plant + PID + switch) for gain tuning.

Runs the same compiled longitudinal RK4, PID and switch kernels as the full
closed-loop harness, so the speed MSE found here is the one a full run
reports for the same gains.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .pid import THROTTLE, _pid_update, _switch_update
from .plant import Environment, VehicleParams, _advance_long, steady_state_torque, wind_samples


@njit(cache=True)
def _speed_loop(kp, ki, kd, vd, w_lon, v0, Te0, dt, n_sub, theta, p,
                tau_d, i_max, band, v_abort, out_v):
    v, T_e = v0, Te0
    integ, d_filt, e_prev = 0.0, 0.0, 0.0
    mode = THROTTLE
    sse = 0.0
    dt_ctrl = dt * n_sub
    for k in range(vd.size):
        e = vd[k] - v
        sse += e * e
        out_v[k] = v
        u, integ, d_filt = _pid_update(e, e_prev, integ, d_filt, k == 0, kp, ki, kd,
                                       dt_ctrl, tau_d, i_max)
        e_prev = e
        thr, brk, mode = _switch_update(u, mode, band)
        v, T_e = _advance_long(v, T_e, thr, brk, w_lon, 2 * k * n_sub, n_sub, dt, theta, p)
        if v > v_abort or not np.isfinite(v):
            return np.inf
    return sse / vd.size


@dataclass
class SpeedTrackingProblem:
    """Speed reference sampled at the PID rate plus everything the
    longitudinal plant needs to follow it."""

    v_ref: np.ndarray
    params: VehicleParams
    env: Environment
    dt_ctrl: float = 0.01
    dt_plant: float = 1e-3
    tau_d: float = 0.05
    i_max: float = 100.0
    band: float = 0.02

    def __post_init__(self):
        self.v_ref = np.ascontiguousarray(self.v_ref, dtype=float)
        self.n_sub = int(round(self.dt_ctrl / self.dt_plant))
        self.w_lon, _ = wind_samples(self.env.wind, 0.0, self.v_ref.size * self.n_sub,
                                     self.dt_plant)
        self.v0 = float(self.v_ref[0])
        self.Te0 = steady_state_torque(self.v0, self.params, self.env, float(self.w_lon[0]))
        self.v_abort = 3.0 * float(self.v_ref.max())
        self._packed = self.params.packed()

    def simulate(self, gains):
        """(mse, speed trace at the control instants)."""
        kp, ki, kd = (float(g) for g in gains)
        out = np.zeros(self.v_ref.size)
        mse = _speed_loop(kp, ki, kd, self.v_ref, self.w_lon, self.v0, self.Te0,
                          self.dt_plant, self.n_sub, self.env.theta, self._packed,
                          self.tau_d, self.i_max, self.band, self.v_abort, out)
        return float(mse), out

    def mse(self, gains) -> float:
        return self.simulate(gains)[0]
