"""Closed-loop co-simulation: PID speed loop at the fast rate, RLS + LPV + MPC
lateral loop at the MPC rate, both driving the nonlinear plant."""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field

import numpy as np

from ..envelope import U_MAX, steer_limit, v_max_array
from ..lpv import adapted_instance
from ..mpc import ENHANCED, STANDARD, LpvMpcController
from ..pid import PidController, PidGains, ThrottleBrakeSwitch
from ..plant import Plant, PlantState, steady_state_torque
from ..pso import tune_pid
from ..rls import CorneringStiffnessRls
from ..speed_loop import SpeedTrackingProblem
from .scenario import Scenario, build_scenario, set_key

COLUMNS = ("t", "v_ref", "v", "throttle", "brake", "delta_f", "y_ref", "y",
           "psi_ref", "psi", "cf_hat", "cr_hat", "wind_speed", "wind_heading",
           "mpc_cost", "mpc_slack", "solve_ms")

Y_ABORT = 100.0
V_ABORT = 60.0
DU_LIMIT = math.pi / 12
TOL = 1e-9


@dataclass
class ScenarioResult:
    name: str
    cost_mode: str
    seed: int
    gains: PidGains
    trace: dict
    aborted: bool = False
    abort_reason: str = ""
    fallbacks: int = 0
    rls_resets: int = 0
    violations: int = 0
    summary: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.trace["t"])


def summarize(trace: dict) -> dict:
    """Tracking metrics recomputed from the trace columns alone."""
    if len(trace["t"]) == 0:
        return {"speed_mse": float("nan"), "position_mse": float("nan"),
                "heading_mse": float("nan"), "max_position_error": float("nan"),
                "max_heading_error": float("nan")}
    ev = np.asarray(trace["v_ref"]) - np.asarray(trace["v"])
    ey = np.asarray(trace["y"]) - np.asarray(trace["y_ref"])
    ep = np.asarray(trace["psi"]) - np.asarray(trace["psi_ref"])
    return {
        "speed_mse": float(np.mean(ev * ev)),
        "position_mse": float(np.mean(ey * ey)),
        "heading_mse": float(np.mean(ep * ep)),
        "max_position_error": float(np.max(np.abs(ey))),
        "max_heading_error": float(np.max(np.abs(ep))),
    }


def count_violations(trace: dict, scenario: Scenario) -> int:
    """Actuator, steering-envelope and speed-admissibility checks on every sample."""
    delta = np.asarray(trace["delta_f"])
    if delta.size == 0:
        return 0
    v = np.asarray(trace["v"])
    bad = np.abs(delta) > U_MAX + TOL
    step = np.abs(np.diff(delta, prepend=delta[0]))
    bad |= step > DU_LIMIT + TOL
    lim = np.array([steer_limit(max(vk, 0.0), scenario.params) for vk in v])
    bad |= np.abs(delta) > lim + TOL
    n = delta.size
    curv = scenario.track.ref_curvature(scenario.stations_nominal[:n])
    vm = v_max_array(curv, scenario.env.mu, scenario.env.phi_r)
    bad |= np.asarray(trace["v_ref"]) > vm + TOL
    return int(np.count_nonzero(bad))


def pid_gains_for(scenario: Scenario, mapper=map):
    """Gains from the scenario file, or PSO-tuned on its speed profile."""
    if scenario.pid_gains is not None:
        return scenario.pid_gains, None
    return tune_pid(speed_problem(scenario), scenario.pso, mapper=mapper)


def speed_problem(scenario: Scenario) -> SpeedTrackingProblem:
    f = scenario.pid_filter
    return SpeedTrackingProblem(scenario.v_ref, scenario.params, scenario.env,
                                scenario.dt_ctrl, scenario.dt_plant,
                                f["tau_d"], f["i_max"], f["band"])


def run(scenario: Scenario, cost_mode: str | None = None, gains: PidGains | None = None,
        timing: bool = False) -> ScenarioResult:
    """Simulate one scenario. ``solve_ms`` is only recorded with ``timing``
    so that traces stay bit-reproducible by default."""
    if gains is None:
        gains, _ = pid_gains_for(scenario)
    mpc_cfg = scenario.mpc if cost_mode is None else scenario.mpc.with_mode(cost_mode)
    params, env, track = scenario.params, scenario.env, scenario.track
    n_sub = int(round(scenario.dt_ctrl / scenario.dt_plant))
    mpc_every = int(round(mpc_cfg.T_s / scenario.dt_ctrl))
    n_ctrl = scenario.v_ref.size

    # start on the reference, in speed equilibrium
    v0 = float(scenario.v_ref[0])
    x0, y0 = (float(c) for c in track.ref_point(0.0))
    w0 = float(env.wind.components(0.0)[0])
    state0 = PlantState(t=0.0, v_x=v0, v_y=0.0, psi=float(track.ref_heading(0.0)),
                        psi_dot=0.0, x_g=x0, y_g=y0,
                        T_e=steady_state_torque(v0, params, env, w0),
                        omega_w=v0 / params.R_w, I_b=0.0)
    plant = Plant(params, env, state0, scenario.dt_plant, scenario.duration + 1.0)

    f = scenario.pid_filter
    pid = PidController(gains, f["tau_d"], f["i_max"])
    switch = ThrottleBrakeSwitch(f["band"])
    rcfg = scenario.rls
    rls = CorneringStiffnessRls(tuple(rcfg["theta0"]), float(rcfg["p0"]), float(rcfg["lambda"]),
                                float(rcfg["dead_band"]))
    mpc = LpvMpcController(mpc_cfg, params)
    noise_rng = np.random.default_rng([scenario.seed, 2])
    f_sigma = float(scenario.noise.get("force_sigma", 0.0))
    a_sigma = float(scenario.noise.get("slip_sigma", 0.0))

    trace = {c: [] for c in COLUMNS}
    result = ScenarioResult(scenario.name, mpc_cfg.cost_mode, scenario.seed, gains, trace)
    steer = 0.0
    cost = slack = solve_ms = 0.0
    s_hint = 0.0
    for k in range(n_ctrl):
        st = plant.state
        s, e = track.project(st.x_g, st.y_g, s_hint)
        s_hint = s
        if abs(e) > Y_ABORT or st.v_x > V_ABORT or not math.isfinite(st.v_x):
            result.aborted = True
            result.abort_reason = f"diverged at t={st.t:.2f}s (e={e:.1f} m, v={st.v_x:.1f} m/s)"
            break

        if k % mpc_every == 0:
            truth = plant.truth(steer)
            forces = np.array([truth.F_f, truth.F_r])
            slips = np.array([truth.alpha_f, truth.alpha_r])
            if f_sigma > 0:
                forces = forces + noise_rng.normal(0.0, f_sigma, 2)
            if a_sigma > 0:
                slips = slips + noise_rng.normal(0.0, a_sigma, 2)
            result.rls_resets += rls.update(forces, slips)

            th = float(track.centre(s)[2])
            dpsi = (st.psi - th + math.pi) % (2 * math.pi) - math.pi
            x_loc = np.array([st.v_y, dpsi, st.psi_dot, e])
            Y_r = track.preview(s, st.v_x, mpc_cfg.T_s, mpc_cfg.N_p)
            lti = adapted_instance(st.v_x, rls.c_f, rls.c_r, params, mpc_cfg.T_s)
            steer, diag = mpc.step(x_loc, steer, Y_r, lti, st.v_x)
            result.fallbacks += diag.fallback
            cost, slack = diag.cost, diag.slack
            solve_ms = diag.solve_ms if timing else 0.0
        # the stability bound tracks the current speed between MPC updates
        lim = steer_limit(max(st.v_x, 0.0), params, mpc_cfg.u_max)
        steer = min(max(steer, -lim), lim)

        v_ref = float(scenario.v_ref[k])
        u = pid.control(v_ref, st.v_x, scenario.dt_ctrl)
        thr, brk = switch(u)
        wind_speed = float(env.wind.speed(st.t))
        wind_heading = float(env.wind.heading(st.t))
        row = (st.t, v_ref, st.v_x, thr, brk, steer, float(track.ref_offset(s)), e,
               float(track.ref_heading(s)), st.psi, rls.c_f, rls.c_r, wind_speed,
               wind_heading, cost, slack, solve_ms)
        for c, val in zip(COLUMNS, row):
            trace[c].append(float(val))
        plant.advance(thr, brk, steer, n_sub)

    result.summary = summarize(trace)
    result.violations = count_violations(trace, scenario)
    result.summary.update(violations=result.violations, fallbacks=result.fallbacks,
                          aborted=int(result.aborted))
    return result


def compare(scenario: Scenario, modes=(STANDARD, ENHANCED), timing: bool = False,
            gains: PidGains | None = None):
    """Run each cost mode on the same scenario, seed and PID gains."""
    if gains is None:
        gains, _ = pid_gains_for(scenario)
    return [run(scenario, mode, gains, timing) for mode in modes]


def sweep(config: dict, key: str, values, seed: int | None = None, cost_mode=None,
          mapper=map):
    """One run per value of the dotted config ``key``; results keep input order."""
    def one(value):
        cfg = set_key(copy.deepcopy(config), key, value)
        return run(build_scenario(cfg, seed), cost_mode)

    return list(mapper(one, list(values)))


def tune(scenario: Scenario, mapper=map):
    """PSO-PID on the scenario's speed profile; returns (gains, PsoResult)."""
    return tune_pid(speed_problem(scenario), scenario.pso, mapper=mapper)
