"""Monte Carlo functionals over replicate ensembles.

Replicate ``i`` always runs on the stream ``(seed, i)`` so that estimates are
reproducible for any worker count.  Survival ``{tau = inf}`` is approximated
by survival up to a finite horizon, which every caller has to state.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import rng as rngmod
from .couplings import approximant
from .ensemble import map_replicates
from .field import Field, Grid, TestFunction, inner_product, total_mass
from .integrator import Coefficients, StepParams, Trajectory, format_float, simulate

Z95 = 1.96


class NoSurvivorsError(RuntimeError):
    """No replicate survived the conditioning horizon."""


class ExtinctionInWindow(ValueError):
    pass


@dataclass(frozen=True)
class Estimate:
    mean: float
    half_width: float
    n: int
    n_conditioned: int | None = None
    name: str = ""

    @property
    def interval(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width

    def row(self) -> list[str]:
        nc = "" if self.n_conditioned is None else str(self.n_conditioned)
        return [self.name, format_float(self.mean), format_float(self.half_width), str(self.n), nc]


def mean_estimate(samples, name: str = "", n_conditioned: int | None = None) -> Estimate:
    """Sample mean with a normal-approximation 95% half-width."""
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty ensemble")
    hw = Z95 * float(np.std(x, ddof=1)) / math.sqrt(x.size) if x.size > 1 else 0.0
    return Estimate(float(np.mean(x)), hw, x.size if n_conditioned is None else n_conditioned, n_conditioned, name)


def proportion_estimate(successes: int, trials: int, n: int | None = None, name: str = "") -> Estimate:
    """Fraction ``successes/trials`` with a 95% half-width.

    Normal approximation inside (0, 1); at 0 or 1 the half-width is the
    Wilson interval's distance from the point estimate.
    """
    if trials <= 0:
        raise ValueError("no trials")
    p = successes / trials
    if 0 < successes < trials:
        hw = Z95 * math.sqrt(p * (1 - p) / trials)
    else:
        z2 = Z95**2
        centre = (p + z2 / (2 * trials)) / (1 + z2 / trials)
        rad = Z95 * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials**2)) / (1 + z2 / trials)
        hw = max(abs(centre + rad - p), abs(centre - rad - p))
    n_total = trials if n is None else n
    return Estimate(p, hw, n_total, trials if n is not None else None, name)


def write_estimates(path: str | Path, estimates: Sequence[Estimate]) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["name", "mean", "half_width", "n", "n_conditioned"])
        for e in estimates:
            w.writerow(e.row())
    return path


def _replicate(p: StepParams, i: int) -> StepParams:
    return replace(p, stream=i)


# -- Laplace functionals and duality -------------------------------------------


def laplace(fields: Sequence[Field], g: TestFunction, name: str = "laplace") -> Estimate:
    """Mean of ``exp(-2 <u, g>)`` over an ensemble."""
    if len(fields) == 0:
        raise ValueError("empty ensemble")
    vals = [math.exp(-2.0 * inner_product(f, g)) for f in fields]
    return mean_estimate(vals, name)


def final_fields(
    u0: Field, c: Coefficients, p: StepParams, t: float, reps: int, workers: int = 1,
    tag: int = rngmod.PRIMARY,
) -> list[Field]:
    if t == 0:
        return [u0] * reps

    def run(i):
        q = _replicate(p, i)
        return simulate(u0, c, q, t, rng=q.generator(tag)).final

    return map_replicates(run, reps, workers)


def self_duality_gap(
    u0: Field, v0: Field, t: float, c: Coefficients, p: StepParams, reps: int, workers: int = 1,
) -> tuple[Estimate, Estimate]:
    """Estimate both sides of ``E exp(-2<u_t, v_0>) = E exp(-2<u_0, v_t>)``.

    The two sides use independent streams.  ``v0`` must have compact support
    inside the domain.
    """
    if v0.window is None or v0.window[0] == 0 or v0.window[1] == v0.size - 1:
        raise ValueError("v0 must be compactly supported away from the domain edges")
    us = final_fields(u0, c, p, t, reps, workers, rngmod.PRIMARY)
    vs = final_fields(v0, c, p, t, reps, workers, rngmod.DUAL)
    left = laplace(us, v0, "E exp(-2<u_t,v_0>)")
    right = laplace(vs, u0, "E exp(-2<u_0,v_t>)")
    return left, right


def duality_consistent(left: Estimate, right: Estimate, z: float = 3.0) -> bool:
    """Whether the ``mean +- z*sigma`` intervals of the two sides overlap."""
    return abs(left.mean - right.mean) <= z * (left.half_width + right.half_width) / Z95


# -- extinction ------------------------------------------------------------------


def superprocess_extinction_exact(theta: float, mass: float, t: float) -> float:
    """``exp(-2 theta m / (1 - exp(-theta t)))`` for the superprocess with mass creation ``theta``."""
    if not theta > 0:
        raise ValueError("theta must be positive")
    if not t > 0:
        raise ValueError("t must be positive")
    if mass < 0:
        raise ValueError("mass must be non-negative")
    return math.exp(-2.0 * theta * mass / -math.expm1(-theta * t))


def extinction_times(
    u0: Field, c: Coefficients, p: StepParams, t: float, reps: int, workers: int = 1,
) -> np.ndarray:
    """Extinction time of each replicate (``inf`` if alive at ``t``)."""

    def run(i):
        tr = simulate(u0, c, _replicate(p, i), t)
        return math.inf if tr.extinction_time is None else tr.extinction_time

    if u0.is_zero:
        return np.zeros(reps)
    return np.array(map_replicates(run, reps, workers))


def extinction_prob(
    u0: Field, c: Coefficients, p: StepParams, t: float, reps: int, workers: int = 1,
    times: np.ndarray | None = None,
) -> Estimate:
    if reps < 1:
        raise ValueError("reps must be at least 1")
    if times is None:
        times = extinction_times(u0, c, p, t, reps, workers)
    k = int(np.sum(times <= t))
    return proportion_estimate(k, len(times), name=f"P(tau<={t:g})")


# -- conditioning on survival ----------------------------------------------------


@dataclass
class ConditionedEnsemble:
    survivors: list[Trajectory]
    survival: Estimate
    horizon: float
    indices: list[int] = field(default_factory=list)
    extras: list = field(default_factory=list)


ObserverFactory = Callable[[], tuple[Callable[[float, Field], None], Callable[[], object]]]


def conditioned_ensemble(
    g0: Field, c: Coefficients, p: StepParams, horizon: float, reps: int,
    sample_every: float | None = None, workers: int = 1,
    observer_factory: ObserverFactory | None = None,
) -> ConditionedEnsemble:
    """Run ``reps`` replicates and keep those alive at ``horizon``.

    ``observer_factory()`` returns ``(observer, collect)``; ``collect()`` is
    stored in ``extras`` for each survivor.
    """
    if g0.is_zero:
        raise NoSurvivorsError("the zero initial condition cannot survive")

    def run(i):
        obs, collect = observer_factory() if observer_factory else (None, lambda: None)
        tr = simulate(g0, c, _replicate(p, i), horizon, sample_every, observer=obs)
        return tr, collect()

    results = map_replicates(run, reps, workers)
    keep = [i for i, (tr, _) in enumerate(results) if tr.survived_to(horizon)]
    if not keep:
        raise NoSurvivorsError(
            f"none of {reps} replicates survived to t={horizon}; raise theta, the initial mass or reps"
        )
    survival = proportion_estimate(len(keep), reps, name=f"P(tau>{horizon:g})")
    return ConditionedEnsemble(
        survivors=[results[i][0] for i in keep],
        survival=survival,
        horizon=horizon,
        indices=keep,
        extras=[results[i][1] for i in keep],
    )


# -- travelling-wave profile -----------------------------------------------------


@dataclass
class ProfileAverage:
    mean: Field
    stderr: np.ndarray
    T: float
    n_conditioned: int
    horizon: float

    def to_csv(self, path: str | Path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "mean", "stderr"])
            for x, m, s in zip(self.mean.x, self.mean.values, self.stderr):
                w.writerow([format_float(x), format_float(m), format_float(s)])
        meta = {
            "T": self.T,
            "horizon": self.horizon,
            "n_conditioned": self.n_conditioned,
            "dx": self.mean.dx,
            "origin": self.mean.origin,
        }
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2) + "\n")
        return path


def _profile_observer(Ts: Sequence[float], K: int):
    sums = np.zeros((len(Ts), K + 1))
    counts = np.zeros(len(Ts), dtype=np.int64)
    Ts_arr = np.asarray(Ts, dtype=np.float64)

    def observe(t: float, f: Field):
        if f.window is None:
            return
        hi = f.window[1]
        lo = hi - K
        seg = np.zeros(K + 1)
        src_lo = max(lo, 0)
        seg[src_lo - lo :] = f.values[src_lo : hi + 1]
        use = t < Ts_arr - 1e-12
        sums[use] += seg
        counts[use] += 1

    def collect():
        return sums / np.maximum(counts, 1)[:, None]

    return observe, collect


def nu_T_profile(
    g0: Field, c: Coefficients, p: StepParams, T: float | Sequence[float], reps: int,
    sample_every: float, width: float = 10.0, workers: int = 1,
    horizon: float | None = None,
) -> ProfileAverage | list[ProfileAverage]:
    """Front-aligned time average ``T^-1 int_0^T u_s(. + R_0(s)) ds`` over survivors.

    The integral is the left Riemann sum over the sample times in
    ``[0, T)``.  Several horizons ``T`` may be given; they share one
    ensemble conditioned on survival to ``horizon`` (default ``max(T)``).
    Profiles are kept on ``[-width, 0]``.
    """
    Ts = [float(T)] if np.ndim(T) == 0 else [float(x) for x in T]
    if min(Ts) <= 0:
        raise ValueError("T must be positive")
    horizon = max(Ts) if horizon is None else horizon
    K, factory = profile_observer_factory(Ts, width, g0.dx)
    ens = conditioned_ensemble(g0, c, p, horizon, reps, sample_every, workers, factory)
    out = profile_averages(ens, Ts, g0.dx, K)
    return out if np.ndim(T) else out[0]


def profile_averages(ens: ConditionedEnsemble, Ts: Sequence[float], dx: float, K: int) -> list[ProfileAverage]:
    """Turn the per-survivor observer output of ``nu_T_profile`` into averages."""
    stack = np.stack(ens.extras)  # survivors x len(Ts) x K+1
    n = stack.shape[0]
    out = []
    for k, t in enumerate(Ts):
        prof = stack[:, k, :]
        se = prof.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros(K + 1)
        out.append(
            ProfileAverage(
                mean=Field(dx, -K * dx, prof.mean(axis=0)),
                stderr=se,
                T=float(t),
                n_conditioned=n,
                horizon=ens.horizon,
            )
        )
    return out


def profile_observer_factory(Ts: Sequence[float], width: float, dx: float):
    K = int(round(width / dx))
    return K, lambda: _profile_observer(list(Ts), K)


# -- speeds, growth, recurrence --------------------------------------------------


def wave_speed(traj: Trajectory, window: tuple[float, float], marker: str = "R0") -> float:
    """Least-squares slope of a front marker over the time window.

    ``marker`` is ``"R0"`` (rightmost positive cell), ``"R1"`` (log
    exponential moment) or ``"level"`` (level-set front; use this one for
    noiseless runs whose support is the whole domain).
    """
    t0, t1 = window
    if traj.extinction_time is not None and traj.extinction_time <= t1:
        raise ExtinctionInWindow(f"trajectory died at t={traj.extinction_time} inside {window}")
    series = {"R0": traj.right, "R1": traj.exp_marker, "level": traj.level_front}[marker]
    sel = (traj.times >= t0 - 1e-12) & (traj.times <= t1 + 1e-12)
    t = traj.times[sel]
    y = series[sel]
    if t.size < 2:
        raise ValueError("need at least two samples in the fit window")
    if not np.all(np.isfinite(y)):
        raise ExtinctionInWindow("marker is undefined inside the fit window")
    tc = t - t.mean()
    return float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))


@dataclass
class MassSpan:
    t: np.ndarray
    mass: np.ndarray
    span: np.ndarray


def mass_and_span(traj: Trajectory) -> MassSpan:
    """Total mass and ``R_0 - L_0`` per sample (``-inf`` span after extinction)."""
    span = np.where(np.isfinite(traj.right), traj.right - traj.left, -math.inf)
    return MassSpan(traj.times.copy(), traj.mass.copy(), span)


def _hits(B: tuple[float, float], revisit_start: float):
    a, b = B
    first = [math.inf]

    def observe(t: float, f: Field):
        if first[0] < math.inf or t < revisit_start - 1e-12 or f.window is None:
            return
        xs, vs = f.active()
        if np.any((vs > 0) & (xs > a) & (xs < b)):
            first[0] = t

    return observe, lambda: first[0]


def recurrence_curve(
    g0: Field, B: tuple[float, float], c: Coefficients, p: StepParams,
    horizons: Sequence[float], revisit_start: float, reps: int,
    sample_every: float | None = None, workers: int = 1,
) -> list[Estimate]:
    """Fraction of survivors charging ``B`` at some sample time in ``[revisit_start, h]``.

    One ensemble, conditioned on survival to ``max(horizons)``, is reused for
    every ``h``, so the curve is non-decreasing in ``h``.
    """
    a, b = B
    if not a < b:
        raise ValueError("B must be a non-empty open interval")
    if a < g0.x[0] or b > g0.x[-1]:
        raise ValueError("B must lie inside the domain")
    hmax = max(horizons)
    if revisit_start > hmax:
        raise ValueError("revisit_start exceeds the horizon")
    ens = conditioned_ensemble(
        g0, c, p, hmax, reps, sample_every, workers,
        observer_factory=lambda: _hits(B, revisit_start),
    )
    first = np.array(ens.extras, dtype=np.float64)
    out = []
    for h in horizons:
        k = int(np.sum(first <= h + 1e-12))
        out.append(proportion_estimate(k, first.size, n=reps, name=f"recurrence(h={h:g})"))
    return out


def recurrence_fraction(
    g0: Field, B: tuple[float, float], c: Coefficients, p: StepParams, horizon: float,
    revisit_start: float, reps: int, sample_every: float | None = None, workers: int = 1,
) -> Estimate:
    return recurrence_curve(g0, B, c, p, [horizon], revisit_start, reps, sample_every, workers)[0]


# -- upper measures ---------------------------------------------------------------


def upper_first_moment_bound(theta: float, phi_mass: float, T: float) -> float:
    """``theta <phi, 1> / (1 - exp(-theta T))``."""
    return theta * phi_mass / -math.expm1(-theta * T)


def upper_moment(
    T: float, N: float, kind: str, phi: Field, c: Coefficients, p: StepParams, grid: Grid,
    reps: int, workers: int = 1,
) -> Estimate:
    """Monte Carlo mean of ``<u_T, phi>`` from the level-``N`` approximant."""
    u0, boundary = approximant(kind, N, grid)
    q = replace(p, boundary=boundary, held_values=None)

    def run(i):
        return inner_product(simulate(u0, c, _replicate(q, i), T).final, phi)

    vals = map_replicates(run, reps, workers)
    return mean_estimate(vals, name=f"E<u_T,phi> kind={kind} N={N:g} T={T:g}")


@dataclass
class FrontScaling:
    T: np.ndarray
    estimates: list[Estimate]
    slope: float
    slope_se: float


def front_scaling_probe(
    Ts: Sequence[float], N: float, c: Coefficients, p: StepParams, grid: Grid, reps: int,
    workers: int = 1,
) -> FrontScaling:
    """``E[max(0, R_0(u_T))]`` for the left-upper approximant at each ``T``.

    One run per replicate is sampled at every ``T`` (multiples of ``dt``).
    The slope is a least-squares fit of ``log E`` against ``log T`` over
    rows with ``T > 0`` and a positive mean.
    """
    Ts = np.asarray(sorted(Ts), dtype=np.float64)
    u0, boundary = approximant("left", N, grid)
    q = replace(p, boundary=boundary, held_values=None)
    positive = Ts[Ts > 0]
    sched = np.concatenate(([0.0], positive))

    def run(i):
        tr = simulate(u0, c, _replicate(q, i), float(positive[-1]), sched)
        return np.maximum(tr.right, 0.0)

    fronts = np.array(map_replicates(run, reps, workers))  # reps x len(sched)
    ests = []
    for T in Ts:
        col = int(np.searchsorted(sched, T - 1e-12))
        ests.append(mean_estimate(fronts[:, col], name=f"E[0 v R0] T={T:g}"))
    means = np.array([e.mean for e in ests])
    use = (Ts > 0) & (means > 0)
    slope, se = math.nan, math.nan
    if use.sum() >= 2:
        lx, ly = np.log(Ts[use]), np.log(means[use])
        if use.sum() > 2:
            coef, cov = np.polyfit(lx, ly, 1, cov=True)
            slope, se = float(coef[0]), float(math.sqrt(cov[0, 0]))
        else:
            slope, se = float(np.polyfit(lx, ly, 1)[0]), 0.0
    return FrontScaling(Ts, ests, slope, se)
