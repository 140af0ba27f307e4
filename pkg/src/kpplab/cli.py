"""Command line entry point: ``kpplab <subcommand> [options]``.

Every subcommand writes delimited CSV files, optional PNG figures and a
``run_manifest.json`` into the output directory.  Exit status is 0 on
success, 2 for configuration errors and 3 when no replicate survives a
conditioning horizon.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, rng as rngmod
from .config import (
    SUBCOMMANDS, ConfigError, RunConfig, normalized_mass_field, parse_assignments,
)
from .couplings import monotone_pair, superprocess_pair
from .ensemble import map_replicates
from .estimators import (
    NoSurvivorsError, conditioned_ensemble, duality_consistent, extinction_prob,
    extinction_times, front_scaling_probe, profile_averages, profile_observer_factory,
    recurrence_curve, self_duality_gap, superprocess_extinction_exact, upper_first_moment_bound,
    upper_moment, wave_speed, write_estimates, Estimate,
)
from .field import total_mass
from .integrator import Coefficients, StepParams, format_float, simulate, superprocess_mode

log = logging.getLogger("kpplab")

ENV_OUTPUT = "KPPLAB_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NO_SURVIVORS = 0, 2, 3

# per-subcommand starting points; config files and --set override them
DEFAULTS: dict[str, dict] = {
    "simulate": {"horizon": 1.0, "sample_every": 0.1},
    "duality": {
        "profile": "kink",
        "partner": "bump(center=0, width=1, height=1)",
        "horizon": 0.5,
        "boundary": "held, held",
        "domain": "-10, 10",
        "reps": 4000,
    },
    "extinction": {"mode": "superprocess", "profile": "bump(mass=1)", "horizon": 1.0, "reps": 4000},
    "wave": {
        "theta": 5.0,
        "profile": "bump(center=0, width=1, height=1)",
        "T": "20, 40",
        "horizon": 40.0,
        "dx": 0.2,
        "dt": 0.016,
        "domain": "-20, 160",
        "sample_every": 0.16,
        "reps": 100,
        "fit_window": "10, 20",
    },
    "recurrence": {
        "theta": 5.0,
        "profile": "bump(center=8, width=1, height=1)",
        "interval": "-1, 1",
        "horizons": "10, 20, 40",
        "dx": 0.2,
        "dt": 0.016,
        "domain": "-30, 30",
        "sample_every": 0.16,
        "reps": 100,
    },
    "upper": {
        "T": "1",
        "levels": "10, 20",
        "kind": "full",
        "phi": "bump(center=0, width=1, height=1)",
        "domain": "-10, 10",
        "dt": 0.003125,
        "reps": 1000,
    },
    "couple": {
        "profile": "bump(center=0, width=1, height=1)",
        "partner": "bump(center=0, width=1, height=2)",
        "horizon": 2.0,
        "sample_every": 0.1,
        "reps": 500,
    },
}


def default_config(subcommand: str) -> RunConfig:
    if subcommand not in SUBCOMMANDS:
        raise ConfigError("subcommand", f"expected one of {SUBCOMMANDS}")
    return RunConfig.from_mapping({"subcommand": subcommand, **DEFAULTS[subcommand]})


def _coefficients(cfg: RunConfig) -> Coefficients:
    c = Coefficients(theta=cfg.theta, noise_on=cfg.noise)
    return superprocess_mode(c) if cfg.mode == "superprocess" else c


def _params(cfg: RunConfig) -> StepParams:
    return StepParams(dt=cfg.dt, dx=cfg.dx, boundary=tuple(cfg.boundary), seed=cfg.seed, scheme=cfg.scheme)


def _field(cfg: RunConfig, key: str):
    try:
        return normalized_mass_field(getattr(cfg, key), cfg.grid)
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def _write_rows(path: Path, header: list[str], rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def _streams(seed: int, reps: int, tags=(rngmod.PRIMARY,)) -> list[str]:
    return [rngmod.stream_id(seed, i, t) for t in tags for i in range(reps)]


class Run:
    """Output bookkeeping shared by the subcommands."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.files: list[Path] = []
        self.streams: list[str] = []
        self.summary: dict = {}

    def add(self, *paths):
        self.files.extend(Path(p) for p in paths)

    def figure(self, fn, *args, **kwargs):
        if not self.cfg.figures:
            return
        from . import plotting

        self.add(getattr(plotting, fn)(*args, **kwargs))


# -- subcommands -----------------------------------------------------------------


def _simulate(run: Run):
    cfg = run.cfg
    u0 = _field(cfg, "profile")
    traj = simulate(u0, _coefficients(cfg), _params(cfg), cfg.horizon, cfg.sample_every)
    run.streams = [traj.stream_id]
    run.add(traj.to_csv(run.out / "trajectory.csv"))
    run.add(traj.final.to_csv(run.out / "final.csv"))
    ext = "" if traj.extinction_time is None else format_float(traj.extinction_time)
    run.add(_write_rows(
        run.out / "summary.csv",
        ["stream_id", "extinction_time", "final_mass"],
        [[traj.stream_id, ext, format_float(total_mass(traj.final))]],
    ))
    run.summary = {"extinction_time": traj.extinction_time}
    run.figure("trajectory_figure", traj, run.out / "trajectory.png")


def _duality(run: Run):
    cfg = run.cfg
    u0, v0 = _field(cfg, "profile"), _field(cfg, "partner")
    left, right = self_duality_gap(u0, v0, cfg.horizon, _coefficients(cfg), _params(cfg), cfg.reps, cfg.workers)
    ok = duality_consistent(left, right)
    gap = Estimate(left.mean - right.mean, math.hypot(left.half_width, right.half_width), cfg.reps, name="gap")
    run.add(write_estimates(run.out / "duality.csv", [left, right, gap]))
    run.streams = _streams(cfg.seed, cfg.reps, (rngmod.PRIMARY, rngmod.DUAL))
    run.summary = {"consistent_at_3_sigma": ok}
    run.figure("estimate_bars", [left, right], run.out / "duality.png", ylabel="Laplace functional")


def _extinction(run: Run):
    cfg = run.cfg
    u0 = _field(cfg, "profile")
    c, p = _coefficients(cfg), _params(cfg)
    times = extinction_times(u0, c, p, cfg.horizon, cfg.reps, cfg.workers)
    est = extinction_prob(u0, c, p, cfg.horizon, cfg.reps, times=times)
    mass = total_mass(u0)
    rows = [est]
    exact = None
    if cfg.theta > 0 and cfg.horizon > 0:
        exact = superprocess_extinction_exact(cfg.theta, mass, cfg.horizon)
        rows.append(Estimate(exact, 0.0, cfg.reps, name="superprocess_exact"))
    run.add(write_estimates(run.out / "extinction.csv", rows))
    grid_t = cfg.horizon * np.arange(1, 21) / 20
    p_hat = np.array([np.mean(times <= t) for t in grid_t])
    ex = np.array([superprocess_extinction_exact(cfg.theta, mass, t) if cfg.theta > 0 and t > 0 else math.nan for t in grid_t])
    run.add(_write_rows(
        run.out / "extinction_curve.csv",
        ["t", "p_hat", "superprocess_exact"],
        [[format_float(a), format_float(b), format_float(e)] for a, b, e in zip(grid_t, p_hat, ex)],
    ))
    run.streams = _streams(cfg.seed, cfg.reps)
    run.summary = {"p_hat": est.mean, "half_width": est.half_width, "exact": exact, "mass": mass}
    run.figure("extinction_figure", grid_t, p_hat, ex, run.out / "extinction.png")


def _wave(run: Run):
    cfg = run.cfg
    g0 = _field(cfg, "profile")
    Ts = sorted(cfg.T)
    horizon = max(cfg.horizon, Ts[-1], cfg.fit_window[1])
    K, factory = profile_observer_factory(Ts, cfg.profile_width, cfg.dx)
    ens = conditioned_ensemble(
        g0, _coefficients(cfg), _params(cfg), horizon, cfg.reps, cfg.sample_every, cfg.workers, factory,
    )
    profiles = profile_averages(ens, Ts, cfg.dx, K)
    for prof in profiles:
        stem = f"profile_T{prof.T:g}"
        run.add(prof.to_csv(run.out / f"{stem}.csv"), run.out / f"{stem}.json")
    marker = "R0" if cfg.noise else "level"
    speeds = [wave_speed(tr, tuple(cfg.fit_window), marker) for tr in ens.survivors]
    run.add(_write_rows(
        run.out / "speeds.csv",
        ["replicate", "stream_id", "speed"],
        [[i, tr.stream_id, format_float(s)] for i, tr, s in zip(ens.indices, ens.survivors, speeds)],
    ))
    run.add(write_estimates(run.out / "survival.csv", [ens.survival]))
    run.streams = _streams(cfg.seed, cfg.reps)
    run.summary = {
        "n_conditioned": len(ens.survivors),
        "mean_speed": float(np.mean(speeds)),
        "marker": marker,
    }
    run.figure("profile_figure", profiles, run.out / "profiles.png")


def _recurrence(run: Run):
    cfg = run.cfg
    g0 = _field(cfg, "profile")
    hs = sorted(cfg.horizons)
    ests = recurrence_curve(
        g0, tuple(cfg.interval), _coefficients(cfg), _params(cfg), hs, cfg.revisit_start,
        cfg.reps, cfg.sample_every, cfg.workers,
    )
    run.add(write_estimates(run.out / "recurrence.csv", ests))
    run.streams = _streams(cfg.seed, cfg.reps)
    run.summary = {"fractions": [e.mean for e in ests], "n_conditioned": ests[0].n_conditioned}
    run.figure("curve_figure", hs, ests, run.out / "recurrence.png", "horizon", "fraction charging B")


def _upper(run: Run):
    cfg = run.cfg
    c, p = _coefficients(cfg), _params(cfg)
    phi = _field(cfg, "phi")
    phi_mass = total_mass(phi)
    ests = []
    for T in cfg.T:
        for N in cfg.levels:
            ests.append(upper_moment(T, N, cfg.kind, phi, c, p, cfg.grid, cfg.reps, cfg.workers))
        ests.append(Estimate(upper_first_moment_bound(cfg.theta, phi_mass, T), 0.0, cfg.reps, name=f"bound T={T:g}"))
    run.add(write_estimates(run.out / "upper_moment.csv", ests))
    scaling = front_scaling_probe(cfg.scaling_T, cfg.scaling_level, c, p, cfg.grid, cfg.reps, cfg.workers)
    slope = Estimate(scaling.slope, 1.96 * scaling.slope_se, cfg.reps, name="log-log slope")
    run.add(write_estimates(run.out / "front_scaling.csv", [*scaling.estimates, slope]))
    run.streams = _streams(cfg.seed, cfg.reps)
    run.summary = {"slope": scaling.slope, "slope_se": scaling.slope_se}
    run.figure("estimate_bars", ests, run.out / "upper_moment.png", ylabel="E<u_T, phi>")
    run.figure("scaling_figure", scaling, run.out / "front_scaling.png")


def _couple(run: Run):
    cfg = run.cfg
    c, p = _coefficients(cfg), _params(cfg)
    u0 = _field(cfg, "profile")
    if cfg.coupling == "monotone":
        v0 = _field(cfg, "partner")
        if not u0 <= v0:
            raise ConfigError("partner", "monotone coupling needs profile <= partner pointwise")

        def one(i):
            return monotone_pair(u0, v0, c, replace(p, stream=i), cfg.horizon, cfg.sample_every)
    else:

        def one(i):
            return superprocess_pair(u0, c, replace(p, stream=i), cfg.horizon, cfg.sample_every)

    pairs = map_replicates(one, cfg.reps, cfg.workers)
    run.add(*pairs[0].export(run.out, "pair"))
    run.add(_write_rows(
        run.out / "pairs.csv",
        ["replicate", "lower_stream", "increment_stream", "min_upper_minus_lower", "violations"],
        [
            [i, pr.manifest()["streams"]["lower"], pr.manifest()["streams"]["increment"],
             format_float(pr.min_gap), pr.violations]
            for i, pr in enumerate(pairs)
        ],
    ))
    run.streams = _streams(cfg.seed, cfg.reps, (rngmod.PRIMARY, rngmod.INCREMENT))
    run.summary = {
        "violations": int(sum(pr.violations for pr in pairs)),
        "min_upper_minus_lower": float(min(pr.min_gap for pr in pairs)),
    }
    run.figure("pair_figure", pairs[0], run.out / "pair.png")


HANDLERS = {
    "simulate": _simulate,
    "duality": _duality,
    "extinction": _extinction,
    "wave": _wave,
    "recurrence": _recurrence,
    "upper": _upper,
    "couple": _couple,
}


def run(cfg: RunConfig, out_dir: str | Path | None = None) -> dict:
    """Execute one experiment and return its manifest (also written to disk)."""
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    r = Run(cfg, out)
    t0 = time.perf_counter()
    HANDLERS[cfg.subcommand](r)
    elapsed = time.perf_counter() - t0
    manifest = {
        "version": __version__,
        "subcommand": cfg.subcommand,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "config_ini": cfg.to_ini(),
        "streams": r.streams,
        "wall_clock_seconds": elapsed,
        "files": [p.name for p in r.files],
        "summary": r.summary,
    }
    (out / "run_manifest.json").write_text(json.dumps(manifest, indent=2, default=float) + "\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="kpplab", description="Monte Carlo experiments for the stochastic KPP equation.")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", help="INI file with [run], [physics] and [numerics] sections")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out", help=f"output directory (overrides ${ENV_OUTPUT} and the config)")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--reps", type=int)
    ap.add_argument("--no-figures", action="store_true")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args: argparse.Namespace) -> RunConfig:
    cfg = default_config(args.subcommand)
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError("--config", str(exc)) from None
        cfg = RunConfig.from_ini(text, base=cfg)
    updates = parse_assignments(args.overrides)
    for key in ("workers", "seed", "reps"):
        if getattr(args, key) is not None:
            updates[key] = getattr(args, key)
    if args.no_figures:
        updates["figures"] = False
    if os.environ.get(ENV_OUTPUT):
        updates["out_dir"] = os.environ[ENV_OUTPUT]
    if args.out:
        updates["out_dir"] = args.out
    updates["subcommand"] = args.subcommand
    return RunConfig.from_mapping(updates, base=cfg)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = config_from_args(args)
        manifest = run(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NoSurvivorsError as exc:
        print(f"no survivors: {exc}", file=sys.stderr)
        return EXIT_NO_SURVIVORS
    print(f"{cfg.subcommand}: wrote {len(manifest['files'])} files to {cfg.out_dir}")
    for k, v in manifest["summary"].items():
        print(f"  {k} = {v}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
