"""Affine LPV lateral model X = [y_dot, psi, psi_dot, y], Y = [y, psi], u = delta_f.

Axle convention: ``a`` is the front axle to CG distance, ``b`` the rear.
Stiffnesses are per tire (two tires per axle).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import V_FLOOR, VehicleParams

C_OUT = np.array([[0.0, 0.0, 0.0, 1.0],
                  [0.0, 1.0, 0.0, 0.0]])
STIFFNESS_BOUNDS = (10_000.0, 200_000.0)


class SchedulingError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulingVector:
    v_x: float
    cf_over_vx: float
    cr_over_vx: float
    c_f: float

    @classmethod
    def from_stiffness(cls, v_x, c_f, c_r, bounds=STIFFNESS_BOUNDS, v_floor=V_FLOOR):
        if v_x < v_floor:
            raise SchedulingError(f"v_x={v_x:.3f} m/s below scheduling floor {v_floor}")
        lo, hi = bounds
        c_f = min(max(c_f, lo), hi)
        c_r = min(max(c_r, lo), hi)
        return cls(v_x, c_f / v_x, c_r / v_x, c_f)

    def as_array(self):
        return np.array([self.v_x, self.cf_over_vx, self.cr_over_vx, self.c_f])


@dataclass(frozen=True)
class LtiInstance:
    A_c: np.ndarray
    B_c: np.ndarray
    A_d: np.ndarray
    B_d: np.ndarray
    C: np.ndarray
    T_s: float


def build_continuous(rho: SchedulingVector, params: VehicleParams, v_floor=V_FLOOR):
    """Continuous (A_c, B_c, C) for the scheduling vector rho.

    Every entry is affine in the components of rho; the entries are read
    from rho directly and never recombined (c_r is only known as c_r/v_x).
    """
    v_x, cf_v, cr_v, c_f = rho.v_x, rho.cf_over_vx, rho.cr_over_vx, rho.c_f
    if v_x < v_floor:
        raise SchedulingError(f"v_x={v_x:.3f} m/s below scheduling floor {v_floor}")
    m, I_z, a, b = params.m, params.I_z, params.a, params.b
    A = np.zeros((4, 4))
    A[0, 0] = -2.0 * (cf_v + cr_v) / m
    A[0, 2] = -v_x - 2.0 * (a * cf_v - b * cr_v) / m
    A[1, 2] = 1.0
    A[2, 0] = -2.0 * (a * cf_v - b * cr_v) / I_z
    A[2, 2] = -2.0 * (a * a * cf_v + b * b * cr_v) / I_z
    A[3, 0] = 1.0
    A[3, 1] = v_x
    B = np.array([[2.0 * c_f / m], [0.0], [2.0 * c_f * a / I_z], [0.0]])
    return A, B, C_OUT.copy()


def discretize(A_c, B_c, C, T_s) -> LtiInstance:
    """Forward-Euler: A_d = I + T_s A_c, B_d = T_s B_c."""
    if not T_s > 0:
        raise ValueError("T_s must be positive")
    A_c = np.atleast_2d(np.asarray(A_c, dtype=float))
    B_c = np.asarray(B_c, dtype=float).reshape(A_c.shape[0], -1)
    A_d = np.eye(A_c.shape[0]) + T_s * A_c
    B_d = T_s * B_c
    return LtiInstance(A_c, B_c, A_d, B_d, np.atleast_2d(np.asarray(C, dtype=float)), T_s)


def adapted_instance(v_x, c_f, c_r, params: VehicleParams, T_s) -> LtiInstance:
    """Fresh discrete model for the current speed and stiffness estimates."""
    rho = SchedulingVector.from_stiffness(max(v_x, V_FLOOR), c_f, c_r)
    return discretize(*build_continuous(rho, params), T_s)
