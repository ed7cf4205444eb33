"""Orientation ranges and exact cos/sin extrema over angle intervals.

Intervals may extend beyond ``(-pi, pi]`` (they come from integrating the
heading over a sampling period and are never wrapped). All functions accept
scalars or arrays.
"""
from __future__ import annotations

import numpy as np

from .intervals import Box

TWO_PI = 2.0 * np.pi


def orientation_interval(theta0: Box, omega: float, d3: Box, tau: float) -> Box:
    """Headings visited on ``[0, tau]`` from ``theta0`` under ``omega + d3``."""
    if tau < 0:
        raise ValueError(f"negative sampling period {tau}")
    lo, hi = orientation_bounds(theta0.lo[0], theta0.hi[0], omega, d3.lo[0], d3.hi[0], tau)
    return Box([lo], [hi])


def orientation_bounds(lo0, hi0, omega, d3lo, d3hi, tau):
    lo = np.asarray(lo0) + np.minimum(0.0, tau * (np.asarray(omega) + d3lo))
    hi = np.asarray(hi0) + np.maximum(0.0, tau * (np.asarray(omega) + d3hi))
    return lo, hi


def _wrap(x):
    # representative in [-pi, pi)
    return np.mod(x + np.pi, TWO_PI) - np.pi


def _hits(lo, hi, c):
    """Whether ``[lo, hi]`` contains ``c + 2 k pi`` for some integer k."""
    k = np.ceil((lo - c) / TWO_PI)
    return c + TWO_PI * k <= hi


def cos_max(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    full = _hits(lo, hi, 0.0) | (hi - lo >= TWO_PI)
    val = np.cos(np.minimum(np.abs(_wrap(lo)), np.abs(_wrap(hi))))
    return _scalar(np.where(full, 1.0, val))


def cos_min(lo, hi):
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    full = _hits(lo, hi, np.pi) | (hi - lo >= TWO_PI)
    val = np.cos(np.maximum(np.abs(_wrap(lo)), np.abs(_wrap(hi))))
    return _scalar(np.where(full, -1.0, val))


def sin_max(lo, hi):
    # sin(x) = cos(x - pi/2)
    return cos_max(np.asarray(lo, float) - np.pi / 2, np.asarray(hi, float) - np.pi / 2)


def sin_min(lo, hi):
    return cos_min(np.asarray(lo, float) - np.pi / 2, np.asarray(hi, float) - np.pi / 2)


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x
