"""Pathwise couplings of two solutions on one probability space.

Each pair is built as ``upper = lower + w`` where the increment ``w`` is
driven by its own noise stream and solves the generalized equation with
coefficients read off the current ``lower`` field:

* monotone: ``w`` from ``v0 - u0`` with annihilation ``2*gamma*u`` and
  overcrowding ``gamma``; then ``upper`` has the law of a solution from ``v0``.
* superprocess: ``w`` from 0 with immigration ``gamma*u^2`` and no
  overcrowding; ``upper`` then solves the equation with ``gamma = 0``.

Since ``w >= 0`` after every step, ``lower <= upper`` holds cell by cell.
The explicit interleaving (``w`` sees the pre-step ``u``) is accurate to
O(dt); it is not an exact-in-law coupling of the continuum equations.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels, rng as rngmod
from .field import (
    ConstantPsiN, Field, Grid, HalfLineZetaN, MirroredXiN, materialize,
)
from .integrator import (
    SCHEMES, Coefficients, StepParams, Trajectory, _alpha_range, _check_grid,
    _observe, _steps_between, _window, sample_schedule, simulate,
)

KINDS = ("monotone", "superprocess")


@dataclass
class CoupledPair:
    lower: Trajectory
    upper: Trajectory
    kind: str
    params: StepParams
    min_gap: float
    violations: int

    def manifest(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.params.seed,
            "streams": {
                "lower": rngmod.stream_id(self.params.seed, self.params.stream, rngmod.PRIMARY),
                "increment": rngmod.stream_id(self.params.seed, self.params.stream, rngmod.INCREMENT),
            },
            "min_upper_minus_lower": self.min_gap,
            "violations": self.violations,
        }

    def export(self, directory: str | Path, stem: str = "pair") -> list[Path]:
        directory = Path(directory)
        files = [
            self.lower.to_csv(directory / f"{stem}_lower.csv"),
            self.upper.to_csv(directory / f"{stem}_upper.csv"),
        ]
        man = directory / f"{stem}_manifest.json"
        man.write_text(json.dumps(self.manifest(), indent=2) + "\n")
        files.append(man)
        return files


def _run_pair(
    u0: Field, w0: Field, gw: tuple[float, float], c: Coefficients, p: StepParams,
    horizon: float, mode: int, kind: str, sample_every, snapshot_times,
) -> CoupledPair:
    _check_grid(u0, p)
    times = sample_schedule(horizon, sample_every, p.dt)
    level = 0.5 * c.theta if c.theta > 0 else 0.5
    snap = {float(t) for t in snapshot_times}
    alpha, beta, gamma = c.arrays(u0.size)
    alo, ahi = _alpha_range(alpha)
    gu = p.ghosts(u0)
    ghosts = np.array([gu[0], gu[1], gw[0], gw[1]], dtype=np.float64)
    gen_u = p.generator(rngmod.PRIMARY)
    gen_w = p.generator(rngmod.INCREMENT)
    u = np.array(u0.values)
    w = np.array(w0.values)
    lims = np.array([*_window(u0), *_window(w0)], dtype=np.int64)
    work_u = np.zeros(u0.size)
    work_w = np.zeros(u0.size)
    stats = np.array([math.inf, 0.0, -1.0, -1.0])
    absorbing = not np.any(ghosts) and alo > ahi
    ext_u = 0.0 if (absorbing and lims[0] > lims[1]) else None
    ext_v = 0.0 if (ext_u is not None and lims[2] > lims[3]) else None
    obs_l = np.empty((times.size, 5))
    obs_u = np.empty((times.size, 5))
    snaps_l: dict[float, Field] = {}
    snaps_u: dict[float, Field] = {}
    lower = u0
    upper = u0 + w0
    for i, t in enumerate(times):
        if i > 0 and ext_v is None:
            nsteps = _steps_between(times[i - 1], t, p.dt)
            stats[2] = stats[3] = -1.0
            _kernels.advance_pair(
                u, w, lims, nsteps, p.dt, p.dx, c.theta, alpha, beta, gamma,
                c.noise_on, SCHEMES[p.scheme], ghosts, alo, ahi, mode,
                gen_u, gen_w, work_u, work_w, stats,
            )
            lower = Field(u0.dx, u0.origin, u)
            upper = Field(u0.dx, u0.origin, u + w)
            if absorbing and ext_u is None and stats[2] >= 0:
                ext_u = float(times[i - 1] + stats[2] * p.dt)
            if absorbing and ext_v is None and stats[3] >= 0:
                ext_v = float(times[i - 1] + stats[3] * p.dt)
        for field, obs, snaps, ext in (
            (lower, obs_l, snaps_l, ext_u),
            (upper, obs_u, snaps_u, ext_v),
        ):
            if ext is not None and ext <= t:
                obs[i] = (0.0, -math.inf, math.inf, -math.inf, -math.inf)
                field = Field.zeros(u0.grid)
            else:
                obs[i] = _observe(field, level)
            if float(t) in snap:
                snaps[float(t)] = field

    def traj(obs, ext, snaps, final, tag):
        return Trajectory(
            times=times, mass=obs[:, 0], right=obs[:, 1], left=obs[:, 2],
            exp_marker=obs[:, 3], level_front=obs[:, 4], extinction_time=ext,
            final=final, snapshots=snaps, stream_id=rngmod.stream_id(p.seed, p.stream, tag),
        )

    min_gap = float(stats[0]) if math.isfinite(stats[0]) else 0.0
    return CoupledPair(
        lower=traj(obs_l, ext_u, snaps_l, lower, rngmod.PRIMARY),
        upper=traj(obs_u, ext_v, snaps_u, upper, rngmod.INCREMENT),
        kind=kind,
        params=p,
        min_gap=min_gap,
        violations=int(stats[1]),
    )


def monotone_pair(
    u0: Field, v0: Field, c: Coefficients, p: StepParams, horizon: float,
    sample_every: float | None = None, snapshot_times=(),
) -> CoupledPair:
    """Solutions from ``u0 <= v0`` with ``u <= v`` pathwise."""
    if not u0.same_lattice(v0):
        raise ValueError("u0 and v0 must share a lattice")
    if not u0 <= v0:
        raise ValueError("monotone coupling needs u0 <= v0 pointwise")
    w0 = Field(u0.dx, u0.origin, v0.values - u0.values)
    gu, gv = p.ghosts(u0), p.ghosts(v0)
    gw = (max(gv[0] - gu[0], 0.0), max(gv[1] - gu[1], 0.0))
    return _run_pair(u0, w0, gw, c, p, horizon, _kernels.MODE_MONOTONE, "monotone", sample_every, snapshot_times)


def superprocess_pair(
    u0: Field, c: Coefficients, p: StepParams, horizon: float,
    sample_every: float | None = None, snapshot_times=(),
) -> CoupledPair:
    """KPP solution ``u`` and a dominating superprocess ``u + w``."""
    gamma = np.asarray(c.gamma)
    if not np.all(gamma == 1.0):
        raise ValueError("superprocess domination is defined for gamma = 1")
    w0 = Field.zeros(u0.grid)
    return _run_pair(u0, w0, (0.0, 0.0), c, p, horizon, _kernels.MODE_SUPERPROCESS, "superprocess", sample_every, snapshot_times)


UPPER_KINDS = ("full", "left", "right")


def approximant(kind: str, N: float, grid: Grid) -> tuple[Field, tuple[str, str]]:
    """Level-``N`` initial profile for an upper measure and its boundary pair."""
    if kind == "full":
        return materialize(ConstantPsiN(N), grid), ("held", "held")
    if kind == "left":
        return materialize(HalfLineZetaN(N), grid), ("held", "absorbing")
    if kind == "right":
        return materialize(MirroredXiN(N), grid), ("absorbing", "held")
    raise ValueError(f"unknown upper-measure kind {kind!r}; expected one of {UPPER_KINDS}")


def upper_measure_sample(
    T: float, N: float, kind: str, c: Coefficients, p: StepParams, grid: Grid,
) -> Field:
    """One draw of ``u_T`` started from the level-``N`` approximant.

    As ``N`` grows the law increases to the upper measure at time ``T``
    (full line, left half-line or right half-line).
    """
    if T <= 0:
        raise ValueError("T must be positive")
    if N < 0:
        raise ValueError("N must be non-negative")
    u0, boundary = approximant(kind, N, grid)
    p = replace(p, boundary=boundary, held_values=None)
    return simulate(u0, c, p, T).final
