"""Particle swarm optimiser with exponentially decaying inertia and
phase-scheduled acceleration coefficients, plus PID gain tuning on top."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

# (c1 increment, c2 increment) per phase of g/G:
# <= 30 %, 30-60 %, 60-85 %, >= 85 %
_PHASES = (
    (0.085, -0.0425),
    (0.045, -0.09),
    (-0.025, 0.05),
    (-0.0025, 0.0025),
)
C_CLAMP = (0.5, 4.0)

PID_BOUNDS = ((0.0, 20.0), (0.0, 2.0), (0.0, 2.0))


@dataclass
class PsoConfig:
    n_particles: int = 30
    G: int = 25
    omega_max: float = 1.0
    omega_min: float = 0.1
    lambda1: float = 3.0
    lambda2: float = 30.0
    c1_init: float = 2.2
    c2_init: float = 2.2
    bounds: tuple = PID_BOUNDS
    seed: int = 0
    v_max_frac: float = 0.5

    def __post_init__(self):
        self.bounds = tuple(tuple(map(float, b)) for b in self.bounds)
        if not self.omega_max > self.omega_min > 0:
            raise ValueError("need omega_max > omega_min > 0")
        if self.G < 1 or self.n_particles < 1:
            raise ValueError("G and n_particles must be >= 1")
        if any(not lo < hi for lo, hi in self.bounds):
            raise ValueError("every bound needs lo < hi")


def inertia_weight(g: int, cfg: PsoConfig) -> float:
    """omega_min + exp(omega_max - lambda1 (omega_max + omega_min) g / G) / lambda2."""
    return cfg.omega_min + math.exp(
        cfg.omega_max - cfg.lambda1 * (cfg.omega_max + cfg.omega_min) * g / cfg.G) / cfg.lambda2


def phase_increments(g: int, G: int):
    """(alpha, beta) increments for generation g; shared phase edges go to the
    earlier phase except 85 %, which opens the last one."""
    frac = g / G
    if frac <= 0.30:
        return _PHASES[0]
    if frac <= 0.60:
        return _PHASES[1]
    if frac < 0.85:
        return _PHASES[2]
    return _PHASES[3]


def acceleration_schedule(g: int, G: int, c1: float, c2: float):
    alpha, beta = phase_increments(g, G)
    lo, hi = C_CLAMP
    return min(max(c1 + alpha, lo), hi), min(max(c2 + beta, lo), hi)


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_fitness: float
    history: list = field(default_factory=list)   # (g, best, omega, c1, c2)
    n_evaluations: int = 0

    @property
    def best_history(self):
        return [h[1] for h in self.history]

    def export_history(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["generation", "best_fitness", "omega", "c1", "c2"])
            for row in self.history:
                w.writerow([row[0]] + [repr(float(x)) for x in row[1:]])


def _evaluate(fitness, X, mapper):
    vals = np.array(list(mapper(fitness, list(X))), dtype=float)
    vals[~np.isfinite(vals)] = np.inf
    return vals


def optimize(fitness, cfg: PsoConfig, init_positions=None, mapper=map) -> PsoResult:
    """Minimise ``fitness`` over the box ``cfg.bounds``.

    ``mapper`` may be swapped for a parallel map; all random draws happen
    before evaluation, so results do not depend on it.
    """
    rng = np.random.default_rng(cfg.seed)
    lo = np.array([b[0] for b in cfg.bounds])
    hi = np.array([b[1] for b in cfg.bounds])
    dim = lo.size
    v_lim = cfg.v_max_frac * (hi - lo)

    if init_positions is None:
        x = lo + rng.random((cfg.n_particles, dim)) * (hi - lo)
    else:
        x = np.clip(np.array(init_positions, dtype=float).reshape(-1, dim), lo, hi)
    n = x.shape[0]
    v = np.zeros_like(x)
    fit = _evaluate(fitness, x, mapper)
    n_eval = n
    pb, pbf = x.copy(), fit.copy()
    gi = int(np.argmin(pbf))
    gb, gbf = pb[gi].copy(), float(pbf[gi])

    c1, c2 = cfg.c1_init, cfg.c2_init
    history = [(0, gbf, inertia_weight(0, cfg), c1, c2)]
    for g in range(cfg.G):
        w = inertia_weight(g, cfg)
        r1 = rng.random((n, dim))
        r2 = rng.random((n, dim))
        v = w * v + c1 * r1 * (pb - x) + c2 * r2 * (gb - x)
        v = np.clip(v, -v_lim, v_lim)
        x = x + v
        out = (x < lo) | (x > hi)
        x = np.clip(x, lo, hi)
        v[out] = 0.0
        fit = _evaluate(fitness, x, mapper)
        n_eval += n
        better = fit < pbf
        pb[better] = x[better]
        pbf[better] = fit[better]
        gi = int(np.argmin(pbf))
        if pbf[gi] < gbf:
            gb, gbf = pb[gi].copy(), float(pbf[gi])
        c1, c2 = acceleration_schedule(g, cfg.G, c1, c2)
        history.append((g + 1, gbf, w, c1, c2))
    return PsoResult(gb, gbf, history, n_eval)


def tune_pid(problem, cfg: PsoConfig | None = None, mapper=map):
    """PSO over (K_p, K_i, K_d) minimising ``problem.mse(gains)``.

    ``problem`` is any object exposing ``mse``; see
    :class:`vehctl.speed_loop.SpeedTrackingProblem`.
    """
    from .pid import PidGains

    cfg = cfg or PsoConfig()
    result = optimize(problem.mse, cfg, mapper=mapper)
    return PidGains(*map(float, result.best_position)), result
