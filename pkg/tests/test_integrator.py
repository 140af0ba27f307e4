import math

import numpy as np
import pytest

from kpplab import rng as rngmod
from kpplab.field import Bump, Field, GaussianKernel, Grid, materialize, total_mass
from kpplab.integrator import (
    Coefficients, StepParams, active_range, sample_schedule, simulate, step, superprocess_mode,
)

HEAT = Coefficients(theta=0.0, gamma=0.0, noise_on=False)


def test_zero_field_is_absorbing_under_noise():
    g = Grid(0.1, -5, 5)
    u = Field.zeros(g)
    p = StepParams(0.004, 0.1, seed=3)
    for scheme in ("split", "euler"):
        v = step(u, Coefficients(), StepParams(0.004, 0.1, seed=3, scheme=scheme))
        assert v.is_zero
    tr = simulate(u, Coefficients(), p, 1.0, 0.1)
    assert tr.extinction_time == 0.0
    assert np.all(tr.mass == 0.0)
    assert np.all(tr.right == -math.inf) and np.all(tr.left == math.inf)
    assert np.all(tr.exp_marker == -math.inf)


def test_constant_is_stationary_without_reaction():
    u = Field(0.1, 0.0, np.full(50, 0.7))
    p = StepParams(0.004, 0.1, boundary=("held", "held"))
    v = simulate(u, HEAT, p, 0.4).final
    np.testing.assert_allclose(v.values, 0.7, rtol=1e-14)


def test_logistic_constant_solution():
    # far from the absorbing edges the field stays spatially constant
    dt = math.log(3) / 250
    u = Field(0.1, -20.0, np.full(401, 0.5))
    tr = simulate(u, Coefficients(1.0, gamma=1.0, noise_on=False), StepParams(dt, 0.1), math.log(3))
    centre = tr.final.values[200]
    assert centre == pytest.approx(0.75, abs=5 * dt)


def test_heat_kernel_semigroup():
    g = Grid(0.05, -6, 6)
    u0 = materialize(GaussianKernel(0.25), g)
    tr = simulate(u0, HEAT, StepParams(0.00125, 0.05), 0.25)
    peak = tr.final.values[g.size // 2]
    exact = 1 / math.sqrt(4 * math.pi * 0.5)
    assert exact == pytest.approx(0.3989, abs=1e-4)
    assert abs(peak - exact) / exact < 0.01


def test_noiseless_conservation():
    g = Grid(0.1, -20, 20)
    u0 = materialize(Bump(0, 1, 1), g)
    tr = simulate(u0, HEAT, StepParams(0.004, 0.1), 2.0, 0.5)
    assert np.max(np.abs(tr.mass - tr.mass[0])) < 1e-6


def test_superprocess_mode():
    c = superprocess_mode(Coefficients(theta=2.5, gamma=1.0, alpha=0.3, beta=0.2))
    assert (c.theta, c.alpha, c.beta, c.gamma) == (2.5, 0.0, 0.0, 0.0)
    assert superprocess_mode(c) == c


def test_stability_bound_enforced():
    with pytest.raises(ValueError, match="stability"):
        StepParams(0.006, 0.1)


def test_sample_interval_must_be_multiple_of_dt():
    u0 = materialize(Bump(), Grid(0.1, -5, 5))
    with pytest.raises(ValueError, match="multiple"):
        simulate(u0, HEAT, StepParams(0.004, 0.1), 0.1, 0.033)


def test_sample_schedule():
    np.testing.assert_allclose(sample_schedule(1.0, 0.25, 0.05), [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(sample_schedule(1.0, None, 0.05), [0, 1.0])
    np.testing.assert_allclose(sample_schedule(0.0, None, 0.05), [0.0])


def test_negative_coefficients_rejected():
    with pytest.raises(ValueError):
        Coefficients(gamma=-1.0)


def test_compiled_euler_matches_numpy_reference():
    g = Grid(0.1, -5, 5)
    u = materialize(Bump(0, 1, 1.5), g)
    c = Coefficients(theta=1.3, beta=0.2, gamma=0.8)
    p = StepParams(0.004, 0.1, scheme="euler", seed=11)
    a, b = active_range(u, c, p)
    noise = rngmod.stream(11, 0).standard_normal(b - a + 1)
    ref = step(u, c, p, noise=noise)
    fast = step(u, c, p, rng=rngmod.stream(11, 0))
    np.testing.assert_allclose(fast.values, ref.values, rtol=1e-12, atol=1e-14)


def test_explicit_noise_needs_one_draw_per_active_cell():
    u = materialize(Bump(0, 1, 1), Grid(0.1, -5, 5))
    p = StepParams(0.004, 0.1, scheme="euler")
    with pytest.raises(ValueError, match="noise draws"):
        step(u, Coefficients(), p, noise=np.zeros(3))


def test_same_stream_same_path_and_streams_differ():
    u0 = materialize(Bump(0, 1, 1), Grid(0.1, -10, 10))
    c = Coefficients()
    a = simulate(u0, c, StepParams(0.004, 0.1, seed=5, stream=2), 1.0, 0.1)
    b = simulate(u0, c, StepParams(0.004, 0.1, seed=5, stream=2), 1.0, 0.1)
    d = simulate(u0, c, StepParams(0.004, 0.1, seed=5, stream=3), 1.0, 0.1)
    np.testing.assert_array_equal(a.mass, b.mass)
    assert not np.array_equal(a.mass, d.mass)
    assert a.stream_id == "5:2:0"


def test_snapshots_after_extinction_are_zero_and_nonnegative():
    g = Grid(0.1, -10, 10)
    u0 = materialize(Bump.with_mass(0.02), g)
    p = StepParams(0.004, 0.1, seed=1)
    c = superprocess_mode(Coefficients(theta=0.0))
    times = [0.2 * k for k in range(1, 11)]
    tr = simulate(u0, c, p, 2.0, 0.2, snapshot_times=times)
    assert tr.extinction_time is not None
    for t, f in tr.snapshots.items():
        assert np.all(f.values >= 0)
        if t >= tr.extinction_time:
            assert f.is_zero


def test_split_scheme_mass_mean_grows_exponentially():
    # the total mass of the superprocess has mean m0 * exp(theta t)
    g = Grid(0.1, -15, 15)
    u0 = materialize(Bump.with_mass(1.0), g)
    c = superprocess_mode(Coefficients(theta=1.0))
    m0 = total_mass(u0)
    masses = [
        simulate(u0, c, StepParams(0.004, 0.1, seed=2, stream=i), 0.5).mass[-1] for i in range(600)
    ]
    mean = np.mean(masses)
    se = np.std(masses, ddof=1) / math.sqrt(len(masses))
    assert abs(mean - m0 * math.exp(0.5)) < 4 * se


def test_trajectory_csv_sentinels(tmp_path):
    tr = simulate(Field.zeros(Grid(0.1, -1, 1)), Coefficients(), StepParams(0.004, 0.1), 0.008)
    text = tr.to_csv(tmp_path / "t.csv").read_text().splitlines()
    assert text[0] == "t,mass,R0,L0,R1"
    assert text[1] == "0.0,0.0,-inf,inf,-inf"
