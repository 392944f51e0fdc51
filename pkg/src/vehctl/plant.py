"""Nonlinear vehicle plant: longitudinal powertrain/brake/wheel dynamics coupled
with a dynamic bicycle model whose lateral tire forces follow the Pacejka
magic formula.

The integration kernels are numba-compiled; the speed-tracking loop used for
PID tuning calls the very same longitudinal kernel, so a tuned loop and a
full closed-loop run produce the same speed trace.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

G = 9.81
V_FLOOR = 0.5  # below this v_x the lateral dynamics are frozen


class PlantInputError(ValueError):
    pass


@dataclass(frozen=True)
class PacejkaCoeffs:
    B: float = 10.0
    C: float = 1.9
    D: float = 1.0
    E: float = 0.97


@dataclass(frozen=True)
class VehicleParams:
    """Physical constants of the reference passenger car. B_a, the powertrain
    actuator model and the wind side area are modelling choices."""

    m: float = 1575.0
    C_d: float = 0.29
    C_r: float = 0.007
    A_f: float = 1.6
    rho_air: float = 1.222
    k_g: float = 3.4
    R_w: float = 0.329
    I_w: float = 0.8
    B_d: float = 0.001
    eta: float = 0.95
    f_b: float = 0.9
    R_m: float = 0.1778
    B_a: float = 0.05
    a: float = 1.6  # front axle -> CG
    b: float = 1.2  # rear axle -> CG
    I_z: float = 2875.0
    pacejka_front: PacejkaCoeffs = field(default_factory=PacejkaCoeffs)
    pacejka_rear: PacejkaCoeffs = field(default_factory=PacejkaCoeffs)
    tau_e: float = 0.2
    T_e_max: float = 250.0
    P_brake_max: float = 4.0e6
    u_b: float = 350.0
    side_drag_area: float = 1.0

    def __post_init__(self):
        positive = ("m", "A_f", "rho_air", "k_g", "R_w", "I_w", "R_m", "B_a",
                    "a", "b", "I_z", "tau_e", "T_e_max", "P_brake_max", "u_b")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.C_d < 0 or self.C_r < 0 or self.B_d < 0:
            raise ValueError("C_d, C_r and B_d must be non-negative")

    @property
    def wheelbase(self) -> float:
        return self.a + self.b

    @property
    def Fz_front(self) -> float:
        """Static normal load on one front tire [N]."""
        return self.m * G * self.b / self.wheelbase / 2.0

    @property
    def Fz_rear(self) -> float:
        return self.m * G * self.a / self.wheelbase / 2.0

    @property
    def c_f_true(self) -> float:
        """Per-tire front cornering stiffness: Pacejka slope at zero slip."""
        p = self.pacejka_front
        return self.Fz_front * p.B * p.C * p.D

    @property
    def c_r_true(self) -> float:
        p = self.pacejka_rear
        return self.Fz_rear * p.B * p.C * p.D

    def packed(self) -> "_Packed":
        pf, pr = self.pacejka_front, self.pacejka_rear
        return _Packed(self.m, self.C_d, self.C_r, self.A_f, self.rho_air, self.k_g,
                       self.R_w, self.I_w, self.B_d, self.f_b, self.R_m, self.B_a,
                       self.a, self.b, self.I_z, self.tau_e, self.T_e_max,
                       self.P_brake_max, self.side_drag_area,
                       self.Fz_front, self.Fz_rear,
                       pf.B, pf.C, pf.D, pf.E, pr.B, pr.C, pr.D, pr.E)


class _Packed(NamedTuple):
    m: float
    C_d: float
    C_r: float
    A_f: float
    rho_air: float
    k_g: float
    R_w: float
    I_w: float
    B_d: float
    f_b: float
    R_m: float
    B_a: float
    a: float
    b: float
    I_z: float
    tau_e: float
    T_e_max: float
    P_brake_max: float
    side_drag_area: float
    Fz_f: float
    Fz_r: float
    Bf: float
    Cf: float
    Df: float
    Ef: float
    Br: float
    Cr: float
    Dr: float
    Er: float


@dataclass
class WindProfile:
    """Rectified-sinusoid wind speed with a linearly rotating heading.

    The heading is measured from the vehicle's longitudinal axis towards its
    left side; heading 0 is a pure headwind.
    """

    peak: float = 0.0
    period: float = 5.0
    phase: float = 0.0
    heading0: float = 0.0
    heading_rate: float = 0.0

    def speed(self, t):
        if self.peak == 0.0:
            return np.zeros_like(np.asarray(t, dtype=float))
        return self.peak * np.abs(np.sin(np.pi * np.asarray(t, dtype=float) / self.period
                                         + self.phase))

    def heading(self, t):
        return self.heading0 + self.heading_rate * np.asarray(t, dtype=float)

    def components(self, t):
        """(headwind, lateral) components [m/s]."""
        s = self.speed(t)
        h = self.heading(t)
        return s * np.cos(h), s * np.sin(h)


@dataclass
class Environment:
    theta: float = 0.0
    mu: float = 0.95
    phi_r: float = 0.0
    wind: WindProfile = field(default_factory=WindProfile)

    def __post_init__(self):
        if not 0 < self.mu <= 1.2:
            raise ValueError("mu must lie in (0, 1.2]")


@dataclass
class PlantState:
    t: float = 0.0
    v_x: float = 0.0
    v_y: float = 0.0
    psi: float = 0.0
    psi_dot: float = 0.0
    x_g: float = 0.0
    y_g: float = 0.0
    T_e: float = 0.0
    omega_w: float = 0.0
    I_b: float = 0.0

    def vector(self) -> np.ndarray:
        return np.array([self.v_x, self.v_y, self.psi, self.psi_dot,
                         self.x_g, self.y_g, self.T_e])


@dataclass
class TireTruth:
    """Per-tire lateral forces and slip angles, as fed to the stiffness estimator."""
    F_f: float
    F_r: float
    alpha_f: float
    alpha_r: float


# ---------------------------------------------------------------- kernels

@njit(cache=True)
def _pacejka(k, Fz, B, C, D, E):
    Bk = B * k
    return Fz * D * math.sin(C * math.atan(Bk - E * (Bk - math.atan(Bk))))


@njit(cache=True)
def _resistive(v, v_w, theta, p):
    va = v + v_w
    return (0.5 * p.rho_air * p.C_d * p.A_f * va * abs(va)
            + p.m * G * p.C_r * math.cos(theta) + p.m * G * math.sin(theta))


@njit(cache=True)
def _long_derivs(v, T_e, throttle, brake, v_w, theta, p):
    """(dv/dt, dT_e/dt) with no-slip wheels: omega_w = v/R_w, so the wheel
    inertia enters as an equivalent mass I_w/R_w^2."""
    T_cmd = min(max(throttle, 0.0), 1.0) * p.T_e_max
    dT = (T_cmd - T_e) / p.tau_e
    T_b = p.f_b * min(max(brake, 0.0), 1.0) * p.P_brake_max * math.pi * p.B_a ** 2 * p.R_m / 2.0
    m_eff = p.m + p.I_w / (p.R_w * p.R_w)
    drive = (p.k_g * T_e - p.B_d * v / p.R_w) / p.R_w
    resist = _resistive(v, v_w, theta, p)
    brake_f = T_b / p.R_w
    if v > 0.0:
        net = drive - resist - brake_f
    else:
        # at standstill resistances and brakes only hold, never push backwards
        push = drive - 0.5 * p.rho_air * p.C_d * p.A_f * v_w * abs(v_w) - p.m * G * math.sin(theta)
        hold = p.m * G * p.C_r * math.cos(theta) + brake_f
        net = push - hold if push > hold else 0.0
    return net / m_eff, dT


@njit(cache=True)
def _slips(v_x, v_y, r, steer, a, b):
    alpha_f = steer - (v_y + a * r) / v_x
    alpha_r = -(v_y - b * r) / v_x
    return alpha_f, alpha_r


@njit(cache=True)
def _derivs(x, throttle, brake, steer, v_w, w_lat, theta, p):
    v_x, v_y, psi, r = x[0], x[1], x[2], x[3]
    d = np.zeros(7)
    d[0], d[6] = _long_derivs(v_x, x[6], throttle, brake, v_w, theta, p)
    if v_x >= V_FLOOR:
        af, ar = _slips(v_x, v_y, r, steer, p.a, p.b)
        Ff = _pacejka(af, p.Fz_f, p.Bf, p.Cf, p.Df, p.Ef)
        Fr = _pacejka(ar, p.Fz_r, p.Br, p.Cr, p.Dr, p.Er)
        F_wind = 0.5 * p.rho_air * p.side_drag_area * w_lat * abs(w_lat)
        d[1] = (2.0 * Ff * math.cos(steer) + 2.0 * Fr + F_wind) / p.m - v_x * r
        d[3] = (2.0 * p.a * Ff * math.cos(steer) - 2.0 * p.b * Fr) / p.I_z
    d[2] = r
    d[4] = v_x * math.cos(psi) - v_y * math.sin(psi)
    d[5] = v_x * math.sin(psi) + v_y * math.cos(psi)
    return d


@njit(cache=True)
def _advance(x, throttle, brake, steer, w_lon, w_lat, j0, n, dt, theta, p):
    """n RK4 steps; wind arrays are sampled on the half-step grid from index j0."""
    x = x.copy()
    for i in range(n):
        j = j0 + 2 * i
        k1 = _derivs(x, throttle, brake, steer, w_lon[j], w_lat[j], theta, p)
        k2 = _derivs(x + 0.5 * dt * k1, throttle, brake, steer, w_lon[j + 1], w_lat[j + 1], theta, p)
        k3 = _derivs(x + 0.5 * dt * k2, throttle, brake, steer, w_lon[j + 1], w_lat[j + 1], theta, p)
        k4 = _derivs(x + dt * k3, throttle, brake, steer, w_lon[j + 2], w_lat[j + 2], theta, p)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if x[0] < 0.0:
            x[0] = 0.0
    return x


@njit(cache=True)
def _advance_long(v, T_e, throttle, brake, w_lon, j0, n, dt, theta, p):
    """Longitudinal-only twin of `_advance` (same arithmetic on v and T_e)."""
    for i in range(n):
        j = j0 + 2 * i
        a1, b1 = _long_derivs(v, T_e, throttle, brake, w_lon[j], theta, p)
        a2, b2 = _long_derivs(v + 0.5 * dt * a1, T_e + 0.5 * dt * b1, throttle, brake, w_lon[j + 1], theta, p)
        a3, b3 = _long_derivs(v + 0.5 * dt * a2, T_e + 0.5 * dt * b2, throttle, brake, w_lon[j + 1], theta, p)
        a4, b4 = _long_derivs(v + dt * a3, T_e + dt * b3, throttle, brake, w_lon[j + 2], theta, p)
        v = v + (dt / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        T_e = T_e + (dt / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        if v < 0.0:
            v = 0.0
    return v, T_e


# ------------------------------------------------------------- public ops

def longitudinal_forces(state: PlantState, params: VehicleParams, env: Environment,
                        t: float | None = None) -> float:
    """Aerodynamic drag, rolling resistance and grade force [N]."""
    t = state.t if t is None else t
    v_w = float(env.wind.components(t)[0])
    return float(_resistive(state.v_x, v_w, env.theta, params.packed()))


def drive_force(T: float, state: PlantState, params: VehicleParams,
                omega_w_dot: float = 0.0) -> float:
    """Wheel force from wheel torque T: (T - B_d w - I_w dw/dt) / R_w."""
    return (T - params.B_d * state.omega_w - params.I_w * omega_w_dot) / params.R_w


def pacejka_force(slip: float, F_z: float, coeffs: PacejkaCoeffs) -> float:
    if F_z < 0:
        raise PlantInputError("normal load must be non-negative")
    return float(_pacejka(slip, F_z, coeffs.B, coeffs.C, coeffs.D, coeffs.E))


def brake_torque(P: float, params: VehicleParams) -> float:
    if P < 0:
        raise PlantInputError("brake pressure must be non-negative")
    return params.f_b * P * math.pi * params.B_a ** 2 * params.R_m / 2.0


def battery_current(T_e: float, omega_w: float, params: VehicleParams) -> float:
    """Monitoring output: motor power over battery voltage, efficiency applied
    when motoring and removed when regenerating."""
    omega_motor = params.k_g * omega_w
    power = T_e * omega_motor
    k = 1 if power >= 0 else 0
    return power / (params.u_b * params.eta ** k)


def tire_truth(state: PlantState, steer: float, params: VehicleParams) -> TireTruth:
    if state.v_x < V_FLOOR:
        return TireTruth(0.0, 0.0, 0.0, 0.0)
    af, ar = _slips(state.v_x, state.v_y, state.psi_dot, steer, params.a, params.b)
    pf, pr = params.pacejka_front, params.pacejka_rear
    return TireTruth(pacejka_force(af, params.Fz_front, pf),
                     pacejka_force(ar, params.Fz_rear, pr), af, ar)


def _state_from_vector(x, t, params):
    omega_w = x[0] / params.R_w
    return PlantState(t=t, v_x=float(x[0]), v_y=float(x[1]), psi=float(x[2]),
                      psi_dot=float(x[3]), x_g=float(x[4]), y_g=float(x[5]),
                      T_e=float(x[6]), omega_w=float(omega_w),
                      I_b=battery_current(float(x[6]), float(omega_w), params))


def wind_samples(wind: WindProfile, t0: float, n: int, dt: float):
    """Headwind and lateral wind on the RK4 half-step grid t0 + j*dt/2, j = 0..2n."""
    t = t0 + np.arange(2 * n + 1) * (0.5 * dt)
    w_lon, w_lat = wind.components(t)
    return np.ascontiguousarray(w_lon, dtype=float), np.ascontiguousarray(w_lat, dtype=float)


def step(state: PlantState, throttle: float, brake: float, steer: float,
         env: Environment, dt: float, params: VehicleParams | None = None) -> PlantState:
    """Advance the plant by one fixed RK4 step of length dt."""
    if not dt > 0:
        raise PlantInputError("dt must be positive")
    params = params or VehicleParams()
    w_lon, w_lat = wind_samples(env.wind, state.t, 1, dt)
    x = _advance(state.vector(), float(throttle), float(brake), float(steer),
                 w_lon, w_lat, 0, 1, dt, env.theta, params.packed())
    return _state_from_vector(x, state.t + dt, params)


class Plant:
    """Stateful wrapper used by the closed-loop harness.

    Wind is pre-sampled over the whole horizon so that every substep reads
    the same values the speed-tracking loop sees.
    """

    def __init__(self, params: VehicleParams, env: Environment, state: PlantState,
                 dt: float = 1e-3, duration: float = 60.0):
        self.params = params
        self.env = env
        self.dt = dt
        self._packed = params.packed()
        self._x = state.vector()
        self._n_steps = 0
        self._t0 = state.t
        n_total = int(round(duration / dt)) + 2
        self._w_lon, self._w_lat = wind_samples(env.wind, state.t, n_total, dt)

    @property
    def t(self) -> float:
        return self._t0 + self._n_steps * self.dt

    @property
    def state(self) -> PlantState:
        return _state_from_vector(self._x, self.t, self.params)

    def advance(self, throttle: float, brake: float, steer: float, n: int = 1) -> PlantState:
        j0 = 2 * self._n_steps
        if j0 + 2 * n >= self._w_lon.size:
            raise PlantInputError("simulation ran past the pre-sampled wind horizon")
        self._x = _advance(self._x, float(throttle), float(brake), float(steer),
                           self._w_lon, self._w_lat, j0, n, self.dt, self.env.theta,
                           self._packed)
        self._n_steps += n
        return self.state

    def truth(self, steer: float) -> TireTruth:
        return tire_truth(self.state, steer, self.params)


def steady_state_torque(v: float, params: VehicleParams, env: Environment,
                        v_w: float = 0.0) -> float:
    """Engine torque that holds speed v on the given road (for initialisation)."""
    resist = float(_resistive(v, v_w, env.theta, params.packed()))
    return (resist * params.R_w + params.B_d * v / params.R_w) / params.k_g
