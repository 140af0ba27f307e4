"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` or ``python tests/test_acceptance.py``.
The lines are also repeated in the pytest terminal summary.
"""
from __future__ import annotations

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from kpplab.cli import default_config, run
from kpplab.config import RunConfig
from kpplab.couplings import monotone_pair, superprocess_pair
from kpplab.field import (
    Bump, Field, GaussianKernel, Grid, KinkF0, materialize, total_mass,
)
from kpplab.integrator import Coefficients, StepParams, simulate, superprocess_mode
from kpplab.markers import right_marker, smoothed_marker, truncated_marker
from kpplab.estimators import (
    extinction_prob, nu_T_profile, recurrence_curve, self_duality_gap,
    superprocess_extinction_exact, upper_first_moment_bound, upper_moment, wave_speed,
)

pytestmark = pytest.mark.slow

RESULTS: list[str] = []


def report(n: int, name: str, ok: bool, detail: str) -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d} {name}: {detail}"
    print(line, flush=True)
    RESULTS.append(line)
    return ok


def _bump_mass_one(grid: Grid) -> Field:
    f = materialize(Bump.with_mass(1.0), grid)
    return f.scaled(1.0 / total_mass(f))


def test_c01_extinction_formula():
    exact = superprocess_extinction_exact(1.0, 1.0, 1.0)
    c = superprocess_mode(Coefficients(theta=1.0))
    coarse = extinction_prob(_bump_mass_one(Grid(0.1, -20, 20)), c, StepParams(0.004, 0.1, seed=1), 1.0, 4000)
    fine = extinction_prob(_bump_mass_one(Grid(0.05, -20, 20)), c, StepParams(0.00125, 0.05, seed=2), 1.0, 4000)
    err_c, err_f = abs(coarse.mean - exact), abs(fine.mean - exact)
    # both runs carry Monte Carlo noise; "toward" is judged at that resolution
    sd = math.hypot(coarse.half_width, fine.half_width)
    ok_main = err_c <= 0.02
    ok_halving = err_f <= err_c + sd
    ok = report(
        1, "extinction vs closed form",
        ok_main and ok_halving,
        f"exact={exact:.5f} p(dx=0.1)={coarse.mean:.5f}+-{coarse.half_width:.5f} "
        f"p(dx=0.05)={fine.mean:.5f}+-{fine.half_width:.5f} |err| {err_c:.5f} -> {err_f:.5f}",
    )
    assert ok


def test_c02_self_duality():
    g = Grid(0.1, -10, 10)
    u0 = materialize(KinkF0(), g)
    v0 = materialize(Bump(0, 1, 1), g)
    p = StepParams(0.004, 0.1, boundary=("held", "held"), seed=3)
    left, right = self_duality_gap(u0, v0, 0.5, Coefficients(theta=1.0), p, 4000)
    s1, s2 = left.half_width / 1.96, right.half_width / 1.96
    ok = abs(left.mean - right.mean) <= 3 * (s1 + s2)
    assert report(
        2, "self-duality",
        ok,
        f"E exp(-2<u_t,v0>)={left.mean:.4f}+-{left.half_width:.4f} "
        f"E exp(-2<u0,v_t>)={right.mean:.4f}+-{right.half_width:.4f} gap={left.mean - right.mean:+.4f}",
    )


def test_c03_pathwise_domination():
    g = Grid(0.1, -15, 15)
    u0 = materialize(Bump(0, 1, 1), g)
    v0 = u0 + materialize(Bump(5, 1, 1), g)
    c = Coefficients(theta=1.0)
    viol = {"monotone": 0, "superprocess": 0}
    gaps = {"monotone": math.inf, "superprocess": math.inf}
    for i in range(500):
        p = StepParams(0.004, 0.1, seed=4, stream=i)
        for kind, pair in (
            ("monotone", monotone_pair(u0, v0, c, p, 2.0, 0.1)),
            ("superprocess", superprocess_pair(u0, c, p, 2.0, 0.1)),
        ):
            viol[kind] += pair.violations
            gaps[kind] = min(gaps[kind], pair.min_gap)
    ok = viol["monotone"] == 0 and viol["superprocess"] == 0
    assert report(
        3, "pathwise domination",
        ok,
        f"violations monotone={viol['monotone']} superprocess={viol['superprocess']} "
        f"min gap {gaps['monotone']:.3g} / {gaps['superprocess']:.3g} over 500 pairs each",
    )


def test_c04_deterministic_front_speed():
    g = Grid(0.1, -10, 60)
    u0 = materialize(Bump(0, 1, 1), g)
    tr = simulate(u0, Coefficients(theta=1.0, noise_on=False), StepParams(0.004, 0.1), 20.0, 0.2)
    speed = wave_speed(tr, (10.0, 20.0), "level")
    assert report(4, "noiseless KPP front speed", 1.8 <= speed <= 2.2, f"level-set slope on [10,20] = {speed:.4f}")


def test_c05_noiseless_oracles():
    heat = Coefficients(theta=0.0, gamma=0.0, noise_on=False)
    g = Grid(0.05, -6, 6)
    tr = simulate(materialize(GaussianKernel(0.25), g), heat, StepParams(0.00125, 0.05), 0.25)
    peak = tr.final.values[g.size // 2]
    exact = 1 / math.sqrt(4 * math.pi * 0.5)
    rel = abs(peak - exact) / exact
    dt = math.log(3) / 250
    u = Field(0.1, -20.0, np.full(401, 0.5))
    lg = simulate(u, Coefficients(theta=1.0, gamma=1.0, noise_on=False), StepParams(dt, 0.1), math.log(3))
    err = abs(lg.final.values[200] - 0.75)
    ok = rel < 0.01 and err < 5 * dt
    assert report(
        5, "noiseless oracles",
        ok,
        f"heat peak {peak:.5f} vs {exact:.5f} (rel {rel:.2e}); logistic {lg.final.values[200]:.5f} vs 0.75 (dt={dt:.4f})",
    )


def test_c06_marker_suite():
    rng = np.random.default_rng(6)
    N = 4.0
    m0s = [0.2, 0.1, 0.05, 0.025]
    sandwich = monotone_m = conv_bad = 0
    finest_gaps = []
    for _ in range(1000):
        n = int(rng.integers(5, 120))
        vals = rng.exponential(1.0, n) * (rng.random(n) < rng.uniform(0.2, 1.0))
        f = Field(0.1, float(rng.uniform(-6, 0)), vals)
        r0 = truncated_marker(f, 0.0, N)
        ms = np.sort(rng.uniform(0, 1.0, 6))
        rs = [truncated_marker(f, m, N) for m in ms]
        monotone_m += int(np.any(np.diff(rs) > 0))
        gaps = []
        for m0 in m0s:
            s = smoothed_marker(f, m0, N)
            if not truncated_marker(f, m0, N) <= s <= r0:
                sandwich += 1
            gaps.append(r0 - s)
        conv_bad += int(np.any(np.diff(gaps) > 1e-3))
        finest_gaps.append(gaps[-1])
    ok = sandwich == 0 and monotone_m == 0 and conv_bad == 0
    assert report(
        6, "marker suite",
        ok,
        f"1000 fields: sandwich violations={sandwich} non-monotone in m={monotone_m} "
        f"non-monotone convergence={conv_bad} median gap at m0=0.025 {np.median(finest_gaps):.3g}",
    )


def test_c07_upper_moment_bound():
    g = Grid(0.1, -10, 10)
    phi = materialize(Bump(0, 1, 1), g)
    c = Coefficients(theta=1.0)
    bound = upper_first_moment_bound(1.0, total_mass(phi), 1.0)
    parts, ok = [], True
    for N in (10.0, 20.0):
        e = upper_moment(1.0, N, "full", phi, c, StepParams(0.004, 0.1, seed=7), g, 1000)
        ok &= e.mean <= bound + 3 * e.half_width
        parts.append(f"N={N:g}: {e.mean:.4f}+-{e.half_width:.4f}")
    assert report(7, "upper-measure moment bound", ok, f"bound={bound:.4f} " + " ".join(parts))


def test_c08_travelling_wave_alignment():
    g = Grid(0.2, -20, 160)
    g0 = materialize(Bump(0, 1, 1), g)
    p20, p40 = nu_T_profile(g0, Coefficients(theta=5.0), StepParams(0.016, 0.2, seed=8), [20.0, 40.0], 120, 0.16, 10.0)
    front = right_marker(p20.mean)
    sel = p20.mean.x >= -5 - 1e-9
    z = np.abs(p20.mean.values - p40.mean.values)[sel] / np.maximum(np.hypot(p20.stderr, p40.stderr)[sel], 1e-300)
    ok_front = p20.n_conditioned >= 100 and abs(front) <= g.dx and abs(right_marker(p40.mean)) <= g.dx
    ok_stat = bool(np.all(z <= 3.0))
    assert report(
        8, "travelling-wave alignment",
        ok_front and ok_stat,
        f"survivors={p20.n_conditioned} front={front:g} "
        f"cells on [-5,0] beyond 3 combined se: {int(np.sum(z > 3))}/{z.size} (max {z.max():.2f} se)",
    )


def test_c09_recurrence_trend():
    g = Grid(0.2, -30, 30)
    g0 = materialize(Bump(8, 1, 1), g)
    ests = recurrence_curve(
        g0, (-1.0, 1.0), Coefficients(theta=5.0), StepParams(0.016, 0.2, seed=9),
        [10.0, 20.0, 40.0], 0.0, 100, 0.16,
    )
    means = [e.mean for e in ests]
    ok = all(b >= a for a, b in zip(means, means[1:])) and means[-1] >= 0.9
    assert report(
        9, "recurrence trend", ok,
        f"fractions at 10/20/40 = {means} among {ests[0].n_conditioned} survivors",
    )


SMALL = {
    "simulate": {},
    "duality": {"reps": 12},
    "extinction": {"reps": 30},
    "wave": {"reps": 4, "T": "2, 4", "horizon": 4.0, "fit_window": "1, 4", "domain": "-20, 40"},
    "recurrence": {"reps": 4, "horizons": "0.96, 1.92"},
    "upper": {"reps": 6, "scaling_T": "0.0625, 0.125, 0.25"},
    "couple": {"reps": 6},
}


def test_c10_determinism(tmp_path):
    mismatched = []
    checked = 0
    for sub, over in SMALL.items():
        base = default_config(sub)
        outs = []
        for w in (1, 4, 8):
            cfg = RunConfig.from_mapping({**over, "workers": w, "figures": False, "seed": 10}, base=base)
            out = tmp_path / f"{sub}_w{w}"
            run(cfg, out)
            outs.append(out)
        for csv in sorted(p.name for p in outs[0].glob("*.csv")):
            ref = (outs[0] / csv).read_bytes()
            checked += 1
            if any((o / csv).read_bytes() != ref for o in outs[1:]):
                mismatched.append(f"{sub}/{csv}")
    assert report(
        10, "determinism across widths 1/4/8",
        not mismatched,
        f"{checked} CSVs compared over {len(SMALL)} subcommands; mismatches: {mismatched or 'none'}",
    )


if __name__ == "__main__":
    import tempfile

    t0 = time.time()
    only = sys.argv[1:]
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and (not only or any(o in name for o in only)):
            try:
                if "tmp_path" in fn.__code__.co_varnames[: fn.__code__.co_argcount]:
                    with tempfile.TemporaryDirectory() as d:
                        fn(Path(d))
                else:
                    fn()
            except AssertionError:
                pass
            except Exception as exc:  # report and carry on with the other criteria
                RESULTS.append(f"[FAIL] {name}: {type(exc).__name__}: {exc}")
                print(RESULTS[-1])
    print(f"{sum(l.startswith('[PASS]') for l in RESULTS)}/{len(RESULTS)} criteria passed in {time.time() - t0:.0f}s")
    sys.exit(0 if all(l.startswith("[PASS]") for l in RESULTS) else 1)
