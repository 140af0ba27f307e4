"""Time stepping for the KPP equation with branching noise.

The generalized equation is

    du = (u_xx + alpha + theta*u - beta*u - gamma*u^2) dt + sqrt(u) dW

with ``W`` space-time white noise.  ``alpha = beta = 0, gamma = 1`` is the
stochastic KPP equation; ``gamma = 0`` gives the superprocess with mass
creation ``theta``.  See :mod:`kpplab._kernels` for the discretization.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels, rng as rngmod
from .field import Field
from .markers import exp_marker, left_marker, level_front, right_marker

logger = logging.getLogger(__name__)

BOUNDARIES = ("absorbing", "held")
SCHEMES = {"split": _kernels.SCHEME_SPLIT, "euler": _kernels.SCHEME_EULER}


@dataclass(frozen=True)
class Coefficients:
    theta: float = 1.0
    alpha: float | np.ndarray = 0.0
    beta: float | np.ndarray = 0.0
    gamma: float | np.ndarray = 1.0
    noise_on: bool = True

    def __post_init__(self):
        if self.theta < 0:
            raise ValueError("theta must be non-negative")
        for name in ("alpha", "beta", "gamma"):
            val = np.asarray(getattr(self, name), dtype=np.float64)
            if np.any(val < 0) or not np.all(np.isfinite(val)):
                raise ValueError(f"{name} must be finite and non-negative")

    def arrays(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        out = []
        for name in ("alpha", "beta", "gamma"):
            val = np.asarray(getattr(self, name), dtype=np.float64)
            if val.ndim and val.shape != (n,):
                raise ValueError(f"{name} has {val.size} cells, field has {n}")
            out.append(np.ascontiguousarray(np.broadcast_to(val, (n,)), dtype=np.float64))
        return tuple(out)


def superprocess_mode(c: Coefficients) -> Coefficients:
    """Drop overcrowding, immigration and annihilation; keep ``theta`` and noise."""
    return replace(c, alpha=0.0, beta=0.0, gamma=0.0)


@dataclass(frozen=True)
class StepParams:
    dt: float
    dx: float
    boundary: tuple[str, str] = ("absorbing", "absorbing")
    held_values: tuple[float, float] | None = None
    seed: int = 0
    stream: int = 0
    scheme: str = "split"

    def __post_init__(self):
        if not (self.dt > 0 and self.dx > 0):
            raise ValueError("dt and dx must be positive")
        if self.dt > 0.5 * self.dx**2 * (1 + 1e-12):
            raise ValueError(
                f"dt={self.dt} violates the explicit stability bound dt <= dx^2/2 = {0.5 * self.dx**2}"
            )
        if len(self.boundary) != 2 or any(b not in BOUNDARIES for b in self.boundary):
            raise ValueError(f"boundary must be a pair from {BOUNDARIES}, got {self.boundary}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def ghosts(self, u0: Field) -> tuple[float, float]:
        """Values of the ghost cells beyond each end of the domain."""
        held = self.held_values or (float(u0.values[0]), float(u0.values[-1]))
        return (
            float(held[0]) if self.boundary[0] == "held" else 0.0,
            float(held[1]) if self.boundary[1] == "held" else 0.0,
        )

    def generator(self, tag: int = rngmod.PRIMARY) -> np.random.Generator:
        return rngmod.stream(self.seed, self.stream, tag)


def _check_grid(u: Field, p: StepParams):
    if not math.isclose(u.dx, p.dx, rel_tol=1e-12):
        raise ValueError(f"field dx={u.dx} does not match step dx={p.dx}")


def _window(u: Field) -> tuple[int, int]:
    return u.window if u.window is not None else (u.size, -1)


def _alpha_range(alpha: np.ndarray) -> tuple[int, int]:
    pos = np.flatnonzero(alpha)
    return (int(pos[0]), int(pos[-1])) if pos.size else (1, 0)


def active_range(u: Field, c: Coefficients, p: StepParams) -> tuple[int, int]:
    """Cells visited by one step: the window padded by one, clipped to the domain."""
    alpha, _, _ = c.arrays(u.size)
    gl, gr = p.ghosts(u)
    alo, ahi = _alpha_range(alpha)
    lo, hi = _window(u)
    return _kernels._active_range(lo, hi, u.size, gl, gr, alo, ahi)


def step(
    u: Field,
    c: Coefficients,
    p: StepParams,
    noise: np.ndarray | None = None,
    rng: np.random.Generator | None = None,
) -> Field:
    """Advance ``u`` by one time step.

    With ``scheme="euler"`` and an explicit ``noise`` array (one standard
    normal per active cell) the step is evaluated directly in numpy.
    Otherwise the compiled kernel draws from ``rng`` (default: the stream
    named by ``p``).
    """
    _check_grid(u, p)
    if noise is not None:
        if p.scheme != "euler":
            raise ValueError("explicit noise draws are only meaningful for the euler scheme")
        return _euler_step_numpy(u, c, p, np.asarray(noise, dtype=np.float64))
    gen = rng if rng is not None else p.generator()
    vals = np.array(u.values)
    alpha, beta, gamma = c.arrays(u.size)
    gl, gr = p.ghosts(u)
    alo, ahi = _alpha_range(alpha)
    lo, hi = _window(u)
    _kernels.advance(
        vals, lo, hi, 1, p.dt, p.dx, c.theta, alpha, beta, gamma, c.noise_on,
        SCHEMES[p.scheme], gl, gr, alo, ahi, gen, np.zeros(u.size),
    )
    return Field(u.dx, u.origin, vals)


def _euler_step_numpy(u: Field, c: Coefficients, p: StepParams, noise: np.ndarray) -> Field:
    a, b = active_range(u, c, p)
    if a > b:
        if noise.size:
            raise ValueError(f"expected 0 noise draws, got {noise.size}")
        return u
    if noise.shape != (b - a + 1,):
        raise ValueError(f"expected {b - a + 1} noise draws (one per active cell), got {noise.size}")
    gl, gr = p.ghosts(u)
    alpha, beta, gamma = c.arrays(u.size)
    padded = np.concatenate(([gl], u.values, [gr]))
    uj = padded[a + 1 : b + 2]
    lap = (padded[a : b + 1] - 2.0 * uj + padded[a + 2 : b + 3]) / p.dx**2
    sl = slice(a, b + 1)
    v = uj + p.dt * (lap + alpha[sl] + c.theta * uj - beta[sl] * uj - gamma[sl] * uj**2)
    if c.noise_on:
        v = v + np.sqrt(uj) * noise * math.sqrt(p.dt / p.dx)
    out = np.array(u.values)
    out[sl] = np.maximum(v, 0.0)
    return Field(u.dx, u.origin, out)


# -- trajectories ------------------------------------------------------------


@dataclass
class Trajectory:
    times: np.ndarray
    mass: np.ndarray
    right: np.ndarray
    left: np.ndarray
    exp_marker: np.ndarray
    level_front: np.ndarray
    extinction_time: float | None = None
    final: Field | None = None
    snapshots: dict[float, Field] = field(default_factory=dict)
    stream_id: str = ""

    @property
    def survived(self) -> bool:
        return self.extinction_time is None

    def survived_to(self, t: float) -> bool:
        return self.extinction_time is None or self.extinction_time > t

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "mass", "R0", "L0", "R1"])
            for row in zip(self.times, self.mass, self.right, self.left, self.exp_marker):
                writer.writerow([format_float(v) for v in row])
        return path


def format_float(v: float) -> str:
    v = float(v)
    if math.isinf(v):
        return "-inf" if v < 0 else "inf"
    return repr(v)


def sample_schedule(horizon: float, every: float | None, dt: float) -> np.ndarray:
    """Sample times ``0, every, 2*every, ..., horizon`` (horizon always included)."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if every is None or every >= horizon:
        return np.array([0.0, horizon]) if horizon > 0 else np.array([0.0])
    n = int(math.floor(horizon / every + 1e-9))
    times = every * np.arange(n + 1)
    if horizon - times[-1] > 1e-9 * max(horizon, 1.0):
        times = np.append(times, horizon)
    return times


def _steps_between(t0: float, t1: float, dt: float) -> int:
    k = (t1 - t0) / dt
    n = int(round(k))
    if abs(k - n) > 1e-6:
        raise ValueError(f"sample interval {t1 - t0} is not a multiple of dt={dt}")
    return n


Observer = Callable[[float, Field], None]


def _observe(f: Field, level: float) -> tuple[float, float, float, float, float]:
    from .field import total_mass

    return total_mass(f), right_marker(f), left_marker(f), exp_marker(f), level_front(f, level)


def simulate(
    u0: Field,
    c: Coefficients,
    p: StepParams,
    horizon: float,
    sample_every: float | Sequence[float] | None = None,
    snapshot_times: Iterable[float] = (),
    observer: Observer | None = None,
    rng: np.random.Generator | None = None,
    level: float | None = None,
) -> Trajectory:
    """Integrate from ``u0`` up to ``horizon`` and record observables.

    ``sample_every`` is either a spacing or an explicit increasing list of
    sample times (multiples of ``dt``).  ``observer(t, field)`` is called at
    every sample time before extinction.  Once the field is identically zero
    (and zero is absorbing) stepping stops and later samples are filled with
    sentinels.  ``level`` is the height of the level-set front (default
    ``theta/2``).
    """
    _check_grid(u0, p)
    if isinstance(sample_every, (list, tuple, np.ndarray)):
        times = np.asarray(sample_every, dtype=np.float64)
        if times[0] != 0.0 or np.any(np.diff(times) <= 0) or times[-1] > horizon + 1e-12:
            raise ValueError("sample times must start at 0, increase, and stay within the horizon")
    else:
        times = sample_schedule(horizon, sample_every, p.dt)
    if level is None:
        level = 0.5 * c.theta if c.theta > 0 else 0.5
    snap = {float(t) for t in snapshot_times}
    gen = rng if rng is not None else p.generator()
    alpha, beta, gamma = c.arrays(u0.size)
    gl, gr = p.ghosts(u0)
    alo, ahi = _alpha_range(alpha)
    scheme = SCHEMES[p.scheme]
    absorbing = gl == 0.0 and gr == 0.0 and alo > ahi

    vals = np.array(u0.values)
    work = np.zeros(u0.size)
    lo, hi = _window(u0)
    obs = np.empty((times.size, 5))
    snapshots: dict[float, Field] = {}
    ext_time = 0.0 if (lo > hi and absorbing) else None
    current = u0
    for i, t in enumerate(times):
        if i > 0 and ext_time is None:
            nsteps = _steps_between(times[i - 1], t, p.dt)
            lo, hi, zero_at = _kernels.advance(
                vals, lo, hi, nsteps, p.dt, p.dx, c.theta, alpha, beta, gamma,
                c.noise_on, scheme, gl, gr, alo, ahi, gen, work,
            )
            current = Field(u0.dx, u0.origin, vals, (lo, hi) if lo <= hi else None)
            if zero_at >= 0 and absorbing:
                ext_time = float(times[i - 1] + zero_at * p.dt)
        if ext_time is not None and ext_time <= t:
            obs[i] = (0.0, -math.inf, math.inf, -math.inf, -math.inf)
            if float(t) in snap:
                snapshots[float(t)] = Field.zeros(u0.grid)
            continue
        obs[i] = _observe(current, level)
        if float(t) in snap:
            snapshots[float(t)] = current
        if observer is not None:
            observer(float(t), current)
    if ext_time is not None:
        current = Field.zeros(u0.grid)
    if c.noise_on:
        _warn_boundary(current, gl, gr)
    return Trajectory(
        times=times,
        mass=obs[:, 0],
        right=obs[:, 1],
        left=obs[:, 2],
        exp_marker=obs[:, 3],
        level_front=obs[:, 4],
        extinction_time=ext_time,
        final=current,
        snapshots=snapshots,
        stream_id=rngmod.stream_id(p.seed, p.stream),
    )


_edge_warned = False


def _warn_boundary(f: Field, gl: float, gr: float):
    global _edge_warned
    if f.window is None:
        return
    lo, hi = f.window
    if (lo == 0 and gl == 0.0) or (hi == f.size - 1 and gr == 0.0):
        # once per process at warning level; ensembles would repeat it per replicate
        level = logging.DEBUG if _edge_warned else logging.WARNING
        _edge_warned = True
        logger.log(level, "support reached an absorbing domain edge; enlarge the domain")
