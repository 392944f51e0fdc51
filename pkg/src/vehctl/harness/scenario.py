"""Scenario definitions: built-in generators and the YAML scenario file format.

A scenario file is a mapping with ``format_version: 1``; every section is
optional and falls back to the built-in defaults of its trajectory kind.
See README.md for the full schema.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from ..envelope import plan_speed, v_max_array
from ..mpc import MpcConfig
from ..pid import PidGains
from ..plant import Environment, PacejkaCoeffs, VehicleParams, WindProfile
from ..pso import PsoConfig
from .track import Track, double_lane_change_track, segment_track

FORMAT_VERSION = 1
KMH = 1.0 / 3.6
SCENARIO_DIR = Path(__file__).with_name("scenarios")


class ScenarioError(ValueError):
    pass


_COMMON = {
    "format_version": FORMAT_VERSION,
    "seed": 0,
    "duration": None,
    "vehicle": {},
    "road": {"mu": 0.95, "camber": 0.0, "elevation": 0.0},
    "wind": {"peak": 8.0, "period": 6.0, "heading_rate": 0.35, "randomize": True},
    "rls_noise": {"force_sigma": 20.0, "slip_sigma": 0.0},
    "rls": {"lambda": 0.995, "p0": 1.0e6, "theta0": [80000.0, 80000.0], "dead_band": 1.0e-3},
    "pid": {"tune": True, "tau_d": 0.05, "i_max": 100.0, "band": 0.02},
    "mpc": {},
    "pso": {},
    "rates": {"dt_plant": 0.001, "dt_ctrl": 0.01},
}

DEFAULTS = {
    "double_lane_change": {
        **_COMMON,
        "name": "double_lane_change",
        "trajectory": {
            "kind": "double_lane_change",
            "lane_offset": 3.5,
            "entry_length": 40.0,
            "transition_time": 3.2,
            "min_transition": 40.0,
            "hold_length": 25.0,
            "exit_length": 80.0,
        },
        "speed": {"unit": "kmh", "stations": [0.0, 40.0, 110.0, 170.0, 260.0],
                  "values": [50.0, 50.0, 65.0, 65.0, 55.0]},
    },
    "general_track": {
        **_COMMON,
        "name": "general_track",
        "trajectory": {
            "kind": "track",
            "transition": 25.0,
            "lane_offset": 0.0,
            "segments": [[50.0, 0.0], [110.0, 0.009], [40.0, 0.0], [120.0, -0.01],
                         [50.0, 0.0], [100.0, 0.007], [60.0, -0.006], [90.0, 0.0]],
        },
        "speed": {"unit": "kmh", "stations": [0.0, 80.0, 200.0, 330.0, 450.0, 620.0],
                  "values": [45.0, 60.0, 52.0, 66.0, 55.0, 60.0]},
    },
}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def set_key(config: dict, dotted: str, value):
    """Assign ``value`` at a dotted path such as ``mpc.beta``."""
    parts = dotted.split(".")
    node = config
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ScenarioError(f"{dotted}: {p} is not a section")
    node[parts[-1]] = value
    return config


@dataclass
class Scenario:
    name: str
    config: dict
    seed: int
    track: Track
    v_ref: np.ndarray          # per control instant
    stations_nominal: np.ndarray
    dt_ctrl: float
    dt_plant: float
    params: VehicleParams
    env: Environment
    mpc: MpcConfig
    pso: PsoConfig
    pid_gains: PidGains | None
    pid_filter: dict = field(default_factory=dict)
    rls: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return self.v_ref.size * self.dt_ctrl

    @property
    def times(self):
        return np.arange(self.v_ref.size) * self.dt_ctrl


def _vehicle(cfg) -> VehicleParams:
    cfg = dict(cfg or {})
    for axle in ("pacejka_front", "pacejka_rear"):
        if axle in cfg:
            cfg[axle] = PacejkaCoeffs(**cfg[axle])
    try:
        return VehicleParams(**cfg)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"vehicle: {exc}") from exc


def _speed_knots(cfg):
    stations = np.asarray(cfg["stations"], dtype=float)
    values = np.asarray(cfg["values"], dtype=float)
    unit = cfg.get("unit", "mps")
    if unit == "kmh":
        values = values * KMH
    elif unit != "mps":
        raise ScenarioError(f"speed.unit must be 'kmh' or 'mps', got {unit!r}")
    if stations.size != values.size or stations.size < 1:
        raise ScenarioError("speed.stations and speed.values must have equal, non-zero length")
    if np.any(np.diff(stations) <= 0):
        raise ScenarioError("speed.stations must be strictly increasing")
    if np.any(values <= 0):
        raise ScenarioError("speed values must be positive")
    return stations, values


def _smooth_profile(stations, values, s):
    """Cosine-blended interpolation between knots (C1 in station)."""
    if stations.size == 1:
        return np.full_like(s, values[0])
    i = np.clip(np.searchsorted(stations, s, side="right") - 1, 0, stations.size - 2)
    u = np.clip((s - stations[i]) / (stations[i + 1] - stations[i]), 0.0, 1.0)
    w = 0.5 - 0.5 * np.cos(np.pi * u)
    return values[i] + (values[i + 1] - values[i]) * w


def _build_track(traj, v_entry) -> Track:
    kind = traj.get("kind")
    if kind == "double_lane_change":
        transition = max(traj["min_transition"], traj["transition_time"] * v_entry)
        return double_lane_change_track(traj["lane_offset"], traj["entry_length"],
                                        transition, traj["hold_length"], traj["exit_length"])
    if kind == "track":
        segs = traj.get("segments") or []
        if not segs or any(len(s) != 2 or s[0] <= 0 for s in segs):
            raise ScenarioError("trajectory.segments must be [length > 0, curvature] pairs")
        return segment_track(segs, traj.get("transition", 20.0), traj.get("lane_offset", 0.0))
    raise ScenarioError(f"unknown trajectory kind {kind!r}")


def build_scenario(config: dict, seed: int | None = None) -> Scenario:
    """Validate a scenario mapping and expand it into a runnable Scenario."""
    if not isinstance(config, dict):
        raise ScenarioError("scenario must be a mapping")
    if config.get("format_version") != FORMAT_VERSION:
        raise ScenarioError(f"format_version must be {FORMAT_VERSION}")
    kind = (config.get("trajectory") or {}).get("kind")
    base = DEFAULTS["general_track" if kind == "track" else "double_lane_change"]
    cfg = _merge(base, config)
    if seed is not None:
        cfg["seed"] = int(seed)
    seed = int(cfg["seed"])

    params = _vehicle(cfg["vehicle"])
    road = cfg["road"]
    try:
        mpc = MpcConfig(**_mpc_kwargs(cfg["mpc"]))
        pso = PsoConfig(**{"seed": seed, **cfg["pso"]})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"controller config: {exc}") from exc

    stations, values = _speed_knots(cfg["speed"])
    track = _build_track(cfg["trajectory"], float(values[0]))
    requested = _smooth_profile(stations, values, track.s)
    curv = track.ref_curvature(track.s)
    mu, camber = float(road["mu"]), float(road["camber"])
    planned = plan_speed(track.s, requested, curv, mu, camber)

    dt_ctrl = float(cfg["rates"]["dt_ctrl"])
    dt_plant = float(cfg["rates"]["dt_plant"])
    if not (dt_ctrl > 0 and dt_plant > 0) or abs(dt_ctrl / dt_plant - round(dt_ctrl / dt_plant)) > 1e-9:
        raise ScenarioError("rates.dt_ctrl must be a positive multiple of rates.dt_plant")
    mpc_every = mpc.T_s / dt_ctrl
    if abs(mpc_every - round(mpc_every)) > 1e-9:
        raise ScenarioError("mpc.T_s must be a multiple of rates.dt_ctrl")

    # nominal station schedule: ride the planned profile in time
    margin = 10.0 + float(values.max()) * mpc.T_s * mpc.N_p
    s_end = track.length - margin
    if s_end <= 0:
        raise ScenarioError("trajectory too short for the preview horizon")
    duration = cfg.get("duration")
    t_max = float(duration) if duration is not None else math.inf
    s_nom, v_ref = [0.0], []
    while True:
        s = s_nom[-1]
        v = float(np.interp(s, track.s, planned))
        v_ref.append(v)
        if len(v_ref) * dt_ctrl >= t_max - 1e-12 or s >= s_end:
            break
        v_mid = float(np.interp(s + 0.5 * v * dt_ctrl, track.s, planned))
        s_nom.append(s + v_mid * dt_ctrl)
    v_ref = np.array(v_ref)
    s_nom = np.array(s_nom)
    vm = v_max_array(track.ref_curvature(s_nom), mu, camber)
    if np.any(v_ref > vm + 1e-9):
        raise ScenarioError("speed reference exceeds the curvature speed limit")

    wcfg = cfg["wind"]
    rng = np.random.default_rng([seed, 1])
    phase, heading0 = 0.0, float(wcfg.get("heading0", 0.0))
    if wcfg.get("randomize", True):
        phase = float(rng.uniform(0.0, math.pi))
        heading0 = float(rng.uniform(-math.pi, math.pi))
    wind = WindProfile(float(wcfg["peak"]), float(wcfg["period"]), phase, heading0,
                       float(wcfg["heading_rate"]))
    try:
        env = Environment(theta=float(road["elevation"]), mu=mu, phi_r=camber, wind=wind)
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    pid_cfg = cfg["pid"]
    gains = None
    if not pid_cfg.get("tune", False):
        if "gains" not in pid_cfg or len(pid_cfg["gains"]) != 3:
            raise ScenarioError("pid needs tune: true or gains: [K_p, K_i, K_d]")
        gains = PidGains(*map(float, pid_cfg["gains"]))

    return Scenario(
        name=str(cfg["name"]), config=cfg, seed=seed, track=track, v_ref=v_ref,
        stations_nominal=s_nom, dt_ctrl=dt_ctrl, dt_plant=dt_plant, params=params,
        env=env, mpc=mpc, pso=pso, pid_gains=gains,
        pid_filter={k: float(pid_cfg[k]) for k in ("tau_d", "i_max", "band")},
        rls=dict(cfg["rls"]), noise=dict(cfg["rls_noise"]))


def _mpc_kwargs(m):
    kw = dict(m)
    if "Q" in kw:
        q = np.asarray(kw["Q"], dtype=float)
        kw["Q"] = np.diag(q) if q.ndim == 1 else q
    for key in ("x_max", "x_min"):
        if key in kw and kw[key] is not None:
            kw[key] = np.array([np.inf if v is None else v for v in kw[key]], dtype=float)
    return kw


def load_config(path) -> dict:
    path = Path(path)
    if not path.exists() and (SCENARIO_DIR / f"{path.name}.yaml").exists():
        path = SCENARIO_DIR / f"{path.name}.yaml"
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def load_scenario(path, seed: int | None = None) -> Scenario:
    return build_scenario(load_config(path), seed)


def double_lane_change(seed: int | None = None, **overrides) -> Scenario:
    """ISO-3888 style double lane change at 50-65 km/h with wind."""
    cfg = _merge(DEFAULTS["double_lane_change"], overrides)
    return build_scenario(cfg, seed)


def general_track(seed: int | None = None, **overrides) -> Scenario:
    """Curved track with several clothoid-joined bends and a varying speed."""
    cfg = _merge(DEFAULTS["general_track"], overrides)
    return build_scenario(cfg, seed)


def shipped_scenarios():
    return sorted(SCENARIO_DIR.glob("*.yaml"))
