"""Speed-tracking PID and throttle/brake switching."""
from __future__ import annotations

from dataclasses import dataclass

from numba import njit

THROTTLE = 1
BRAKE = -1


@dataclass
class PidGains:
    K_p: float
    K_i: float
    K_d: float

    def as_tuple(self):
        return (self.K_p, self.K_i, self.K_d)


@njit(cache=True)
def _pid_update(e, e_prev, integ, d_filt, first, kp, ki, kd, dt, tau_d, i_max):
    """Trapezoidal integral, filtered backward-difference derivative on the
    error, output saturated to [-1, 1], integral frozen while saturating."""
    if first:
        e_prev = e
    raw = (e - e_prev) / dt
    d_filt = d_filt + dt / (tau_d + dt) * (raw - d_filt)
    cand = integ + 0.5 * (e + e_prev) * dt
    cand = min(max(cand, -i_max), i_max)
    u = kp * e + ki * cand + kd * d_filt
    if (u > 1.0 and e > 0.0) or (u < -1.0 and e < 0.0):
        u = kp * e + ki * integ + kd * d_filt
    else:
        integ = cand
    u = min(max(u, -1.0), 1.0)
    return u, integ, d_filt


@njit(cache=True)
def _switch_update(command, mode, band):
    """Sign switch with a hysteresis band around zero; returns (throttle, brake, mode)."""
    if mode == THROTTLE and command < -band:
        mode = BRAKE
    elif mode == BRAKE and command > band:
        mode = THROTTLE
    if mode == THROTTLE:
        return max(command, 0.0), 0.0, mode
    return 0.0, max(-command, 0.0), mode


class PidController:
    """Discrete speed PID producing a normalised command in [-1, 1].

    Negative commands are brake demand, positive throttle demand.
    """

    def __init__(self, gains: PidGains, tau_d: float = 0.05, i_max: float = 100.0):
        self.gains = gains
        self.tau_d = tau_d
        self.i_max = i_max
        self.reset()

    def reset(self):
        self.integral = 0.0
        self.e_prev = 0.0
        self.d_filt = 0.0
        self._first = True

    def control(self, v_ref: float, v: float, dt: float) -> float:
        if not dt > 0:
            raise ValueError("dt must be positive")
        e = v_ref - v
        g = self.gains
        u, self.integral, self.d_filt = _pid_update(
            e, self.e_prev, self.integral, self.d_filt, self._first,
            g.K_p, g.K_i, g.K_d, dt, self.tau_d, self.i_max)
        self.e_prev = e
        self._first = False
        return float(u)


def switch_logic(command: float):
    """Hard sign rule: exactly one of (throttle, brake) is non-zero."""
    if command >= 0:
        return float(command), 0.0
    return 0.0, float(-command)


class ThrottleBrakeSwitch:
    """`switch_logic` with a +-band hysteresis to stop throttle/brake chatter."""

    def __init__(self, band: float = 0.02):
        self.band = band
        self.mode = THROTTLE

    def __call__(self, command: float):
        thr, brk, self.mode = _switch_update(float(command), self.mode, self.band)
        return float(thr), float(brk)
