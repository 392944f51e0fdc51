"""Lateral-stability envelope: curvature speed limit and side-slip steering limit."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .plant import G, VehicleParams

U_MAX = math.pi / 6
INNER_FLOOR_DEG = 1.5
A_DECEL_MAX = 3.0


class EnvelopeDomainError(ValueError):
    pass


@dataclass(frozen=True)
class RoadPoint:
    s: float
    curvature: float
    camber: float = 0.0
    mu: float = 0.95

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if not math.isfinite(self.curvature):
            raise ValueError("curvature must be finite")


def v_max(point: RoadPoint) -> float:
    """Highest admissible speed on the point's curvature; inf on straights.

    The curvature sign only encodes turn direction and is ignored.
    """
    denom = 1.0 - point.camber * point.mu
    if denom <= 0:
        raise EnvelopeDomainError("1 - camber*mu must be positive")
    rho = abs(point.curvature)
    if rho < 1e-12:
        return math.inf
    return math.sqrt(G / rho * (point.camber + point.mu) / denom)


def v_max_array(curvature, mu=0.95, camber=0.0):
    curvature = np.abs(np.asarray(curvature, dtype=float))
    denom = 1.0 - camber * mu
    if denom <= 0:
        raise EnvelopeDomainError("1 - camber*mu must be positive")
    safe = np.where(curvature < 1e-12, 1.0, curvature)
    out = np.sqrt(G / safe * (camber + mu) / denom)
    return np.where(curvature < 1e-12, np.inf, out)


def inner_angle_deg(v_x: float) -> float:
    """Side-slip bound 10 - 7 v^2 / 40, read in degrees with v in m/s."""
    return 10.0 - 7.0 * v_x * v_x / 40.0


def steer_limit_raw(v_x: float, params: VehicleParams) -> float:
    """Unfloored, unclamped steering bound [rad]; negative above ~7.56 m/s."""
    beta = math.radians(inner_angle_deg(v_x))
    return math.atan(params.wheelbase * math.tan(beta) / params.a)


def steer_limit(v_x: float, params: VehicleParams, u_max: float = U_MAX,
                floor_deg: float = INNER_FLOOR_DEG) -> float:
    if v_x < 0:
        raise ValueError("v_x must be non-negative")
    beta = math.radians(max(inner_angle_deg(v_x), floor_deg))
    lim = math.atan(params.wheelbase * math.tan(beta) / params.a)
    return min(max(lim, 0.0), u_max)


def plan_speed(stations, requested, curvature, mu=0.95, camber=0.0,
               a_max: float = A_DECEL_MAX):
    """Clip a requested station profile to v_max, then limit deceleration.

    The backward pass guarantees v[i]^2 <= v[i+1]^2 + 2 a_max ds so the
    vehicle can brake down to every curve limit in time.
    """
    stations = np.asarray(stations, dtype=float)
    v = np.minimum(np.asarray(requested, dtype=float), v_max_array(curvature, mu, camber))
    for i in range(len(v) - 2, -1, -1):
        ds = stations[i + 1] - stations[i]
        v[i] = min(v[i], math.sqrt(v[i + 1] ** 2 + 2.0 * a_max * ds))
    return v
