"""Wavefront markers on grid fields.

Markers are grid-valued: the rightmost (leftmost) strictly positive cell,
without sub-cell interpolation.  The empty-support sentinels are ``-inf`` for
right-type markers and ``+inf`` for the left marker.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad
from scipy.special import logsumexp

from .field import Field


def right_marker(f: Field) -> float:
    """Coordinate of the rightmost positive cell; ``-inf`` for the zero field."""
    if f.window is None:
        return -math.inf
    return float(f.x[f.window[1]])


def left_marker(f: Field) -> float:
    if f.window is None:
        return math.inf
    return float(f.x[f.window[0]])


def exp_marker(f: Field) -> float:
    """``ln <f, exp>`` evaluated in log-space; ``-inf`` for the zero field."""
    if f.window is None:
        return -math.inf
    xs, vs = f.active()
    pos = vs > 0
    return float(logsumexp(xs[pos] + np.log(vs[pos]))) + math.log(f.dx)


def level_front(f: Field, level: float) -> float:
    """Rightmost cell with value at least ``level`` (``-inf`` if none).

    For noiseless runs the solution is positive everywhere, so the
    support-based marker is useless there; this is the front used instead.
    """
    if f.window is None:
        return -math.inf
    xs, vs = f.active()
    idx = np.flatnonzero(vs >= level)
    return float(xs[idx[-1]]) if idx.size else -math.inf


def _tail_masses(f: Field, N: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Cells in ``[-N, N]`` with their values and the tail masses ``<f, 1(x < . <= N)>``."""
    x = f.x
    tol = 1e-9 * f.dx
    inside = np.flatnonzero((x >= -N - tol) & (x <= N + tol))
    if inside.size == 0:
        return np.empty(0), np.empty(0), np.empty(0)
    vals = f.values[inside]
    # cell j covers [x_j - dx/2, x_j + dx/2], so its own right half counts;
    # without it the front cell never carries tail mass and R^{m,N} jumps at m = 0
    csum = np.cumsum(vals[::-1])[::-1]
    tail = f.dx * (csum - 0.5 * vals)
    return x[inside], vals, tail


def truncated_marker(f: Field, m: float, N: float) -> float:
    """``sup{x in [-N, N]: f(x) > 0 and <f, 1(x < . <= N)> >= m}``, with ``sup {} = -N``."""
    if N <= 0:
        raise ValueError("N must be positive")
    if m < 0:
        raise ValueError("mass threshold must be non-negative")
    xs, vals, tail = _tail_masses(f, N)
    ok = np.flatnonzero((vals > 0) & (tail >= m))
    if ok.size == 0:
        return -float(N)
    return float(min(xs[ok[-1]], N))


def _phi(x: float) -> float:
    if not -1.0 < x < 0.0:
        return 0.0
    s = 2.0 * x + 1.0
    return math.exp(-1.0 / (1.0 - s * s))


_PHI_NORM = 1.0 / quad(_phi, -1.0, 0.0, epsabs=1e-14, epsrel=1e-13)[0]


@dataclass(frozen=True)
class SmoothingKernel:
    """Unit-mass smooth bump supported on ``(-m0, 0)``: ``Phi(x/m0)/m0``."""

    m0: float
    nodes: int = 64

    def __post_init__(self):
        if not self.m0 > 0:
            raise ValueError("m0 must be positive")
        if self.nodes < 1:
            raise ValueError("need at least one quadrature node")

    def phi(self, x: float) -> float:
        return _PHI_NORM * _phi(x / self.m0) / self.m0

    @cached_property
    def quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint nodes in ``m`` on ``(0, m0)`` and weights summing to one.

        The weights are renormalized so the smoothed marker is a convex
        combination of truncated markers.
        """
        h = self.m0 / self.nodes
        ms = h * (np.arange(self.nodes) + 0.5)
        w = np.array([self.phi(-m) for m in ms]) * h
        return ms, w / w.sum()


def smoothed_marker(f: Field, k: SmoothingKernel | float, N: float) -> float:
    """``int_0^m0 Phi_m0(-m) R^{m,N}(f) dm`` by midpoint quadrature."""
    if not isinstance(k, SmoothingKernel):
        k = SmoothingKernel(float(k))
    ms, w = k.quadrature
    xs, vals, tail = _tail_masses(f, N)
    pos = vals > 0
    # R^{m,N} for all nodes at once: rightmost eligible cell per threshold
    out = np.full(ms.size, -float(N))
    if np.any(pos):
        xp, tp = xs[pos], tail[pos]
        # tail mass is non-increasing left to right, so the eligible set is a prefix
        # of the positive cells; its last index is the count of tp >= m minus one
        order = tp[::-1]  # non-decreasing
        counts = tp.size - np.searchsorted(order, ms, side="left")
        has = counts > 0
        out[has] = np.minimum(xp[counts[has] - 1], N)
    # a convex combination; clamp away the last-ulp rounding of the dot product
    return float(min(max(np.dot(w, out), out.min()), out.max()))
