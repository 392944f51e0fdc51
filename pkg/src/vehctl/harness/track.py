"""Road centreline plus lateral-offset reference, sampled on a uniform station grid."""
from __future__ import annotations

import math

import numpy as np


def quintic_step(u):
    """Smooth 0 -> 1 step on u in [0, 1] with zero slope and curvature at both ends,
    returned with its first and second derivatives."""
    u = np.clip(u, 0.0, 1.0)
    y = 10 * u**3 - 15 * u**4 + 6 * u**5
    dy = 30 * u**2 - 60 * u**3 + 30 * u**4
    ddy = 60 * u - 180 * u**2 + 120 * u**3
    return y, dy, ddy


class Track:
    """Centreline (X, Y, heading, curvature) over stations ``s`` with a
    lateral reference offset measured along the left normal."""

    def __init__(self, s, kappa, offset=None, offset_slope=None, offset_curv=None,
                 x0=0.0, y0=0.0, heading0=0.0):
        self.s = np.asarray(s, dtype=float)
        self.ds = float(self.s[1] - self.s[0])
        self.kappa = np.asarray(kappa, dtype=float)
        n = self.s.size
        self.offset = np.zeros(n) if offset is None else np.asarray(offset, dtype=float)
        self.offset_slope = np.zeros(n) if offset_slope is None else np.asarray(offset_slope, dtype=float)
        self.offset_curv = np.zeros(n) if offset_curv is None else np.asarray(offset_curv, dtype=float)
        # heading and position by trapezoidal integration of curvature
        self.theta = heading0 + np.concatenate(
            [[0.0], np.cumsum(0.5 * (self.kappa[1:] + self.kappa[:-1]) * self.ds)])
        c, sn = np.cos(self.theta), np.sin(self.theta)
        self.X = x0 + np.concatenate([[0.0], np.cumsum(0.5 * (c[1:] + c[:-1]) * self.ds)])
        self.Y = y0 + np.concatenate([[0.0], np.cumsum(0.5 * (sn[1:] + sn[:-1]) * self.ds)])

    @property
    def length(self) -> float:
        return float(self.s[-1])

    def _interp(self, arr, s):
        return np.interp(s, self.s, arr)

    def centre(self, s):
        return self._interp(self.X, s), self._interp(self.Y, s), self._interp(self.theta, s)

    def ref_offset(self, s):
        return self._interp(self.offset, s)

    def ref_heading(self, s):
        return self._interp(self.theta, s) + np.arctan(self._interp(self.offset_slope, s))

    def ref_curvature(self, s):
        """Curvature of the reference curve (offset treated as a small perturbation)."""
        slope = self.offset_slope
        k_off = self.offset_curv / (1.0 + slope**2) ** 1.5
        return self._interp(self.kappa + k_off, s)

    def ref_point(self, s):
        x, y, th = self.centre(s)
        off = self.ref_offset(s)
        return x - off * np.sin(th), y + off * np.cos(th)

    def project(self, X, Y, s_hint=None, window=15.0):
        """Station and signed lateral coordinate (left positive) of point (X, Y)."""
        if s_hint is None:
            lo, hi = 0, self.s.size
        else:
            i0 = int(round(s_hint / self.ds))
            w = int(window / self.ds)
            lo, hi = max(0, i0 - w), min(self.s.size, i0 + w + 1)
        d2 = (self.X[lo:hi] - X) ** 2 + (self.Y[lo:hi] - Y) ** 2
        i = lo + int(np.argmin(d2))
        th = self.theta[i]
        dx, dy = X - self.X[i], Y - self.Y[i]
        along = dx * math.cos(th) + dy * math.sin(th)
        s = min(max(self.s[i] + along, 0.0), self.length)
        cx, cy, cth = self.centre(s)
        e = -(X - cx) * math.sin(cth) + (Y - cy) * math.cos(cth)
        return float(s), float(e)

    def preview(self, s0, v_x, T_s, N_p):
        """Reference [y, psi] for j = 1..N_p in the frame tangent to the
        centreline at s0 (origin on the centreline)."""
        cx, cy, th0 = self.centre(s0)
        sj = np.minimum(s0 + v_x * T_s * np.arange(1, N_p + 1), self.length)
        rx, ry = self.ref_point(sj)
        y_loc = -(rx - cx) * math.sin(th0) + (ry - cy) * math.cos(th0)
        psi_loc = self.ref_heading(sj) - th0
        return np.column_stack([y_loc, psi_loc]).ravel()


def double_lane_change_track(lane_offset=3.5, entry_length=40.0, transition=45.0,
                             hold_length=25.0, exit_length=80.0, ds=0.1) -> Track:
    total = entry_length + 2 * transition + hold_length + exit_length
    s = np.arange(0.0, total + ds / 2, ds)
    up, dup, ddup = quintic_step((s - entry_length) / transition)
    t2 = entry_length + transition + hold_length
    dn, ddn, dddn = quintic_step((s - t2) / transition)
    off = lane_offset * (up - dn)
    slope = lane_offset * (dup - ddn) / transition
    curv = lane_offset * (ddup - dddn) / transition**2
    return Track(s, np.zeros_like(s), off, slope, curv)


def segment_track(segments, transition=20.0, lane_offset=0.0, ds=0.1) -> Track:
    """Centreline from (length, curvature) segments; curvature steps are
    blended linearly over ``transition`` metres (clothoid joints)."""
    lengths = np.array([seg[0] for seg in segments], dtype=float)
    kappas = np.array([seg[1] for seg in segments], dtype=float)
    total = float(lengths.sum())
    s = np.arange(0.0, total + ds / 2, ds)
    edges = np.concatenate([[0.0], np.cumsum(lengths)])
    idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(kappas) - 1)
    k_step = kappas[idx]
    w = max(1, int(round(transition / ds)))
    if w > 1:
        pad = np.concatenate([np.full(w, k_step[0]), k_step, np.full(w, k_step[-1])])
        kernel = np.ones(w) / w
        k = np.convolve(pad, kernel, mode="same")[w:-w]
    else:
        k = k_step
    off = np.full_like(s, lane_offset)
    return Track(s, k, off)
