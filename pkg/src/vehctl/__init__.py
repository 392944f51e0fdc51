"""Adaptive LPV-MPC lateral control with PSO-tuned PID speed control."""

__version__ = "0.1.0"
