"""Grid fields: non-negative densities on a uniform 1-D lattice.

A :class:`Field` holds the full domain array plus the index window outside of
which every value is exactly zero.  Fields are treated as immutable values;
the underlying array is flagged read-only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field
from functools import cached_property
from pathlib import Path
from typing import Callable, Union

import numpy as np
from scipy.integrate import quad

TestFunction = Union[float, np.ndarray, Callable[[np.ndarray], np.ndarray], "Field"]


@dataclass(frozen=True)
class Grid:
    """Uniform lattice ``x_j = lo + j*dx`` covering ``[lo, hi]`` inclusive."""

    dx: float
    lo: float
    hi: float

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        if not self.hi > self.lo:
            raise ValueError(f"empty domain [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return int(round((self.hi - self.lo) / self.dx)) + 1

    @property
    def x(self) -> np.ndarray:
        return self.lo + self.dx * np.arange(self.size)


@dataclass(frozen=True, eq=False)
class Field:
    dx: float
    origin: float
    values: np.ndarray
    window: tuple[int, int] | None = dc_field(default=None)

    def __post_init__(self):
        if not self.dx > 0:
            raise ValueError(f"dx must be positive, got {self.dx}")
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size == 0:
            raise ValueError("values must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("field values must be finite and non-negative")
        pos = np.flatnonzero(vals)
        actual = (int(pos[0]), int(pos[-1])) if pos.size else None
        window = self.window
        if window is None:
            window = actual
        else:
            lo, hi = int(window[0]), int(window[1])
            if lo > hi or lo < 0 or hi >= vals.size:
                raise ValueError(f"inconsistent window {window} for {vals.size} cells")
            if actual is not None and (actual[0] < lo or actual[1] > hi):
                raise ValueError("non-zero values outside the window")
            window = (lo, hi)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "window", window)

    @classmethod
    def zeros(cls, grid: Grid) -> Field:
        return cls(grid.dx, grid.lo, np.zeros(grid.size))

    @cached_property
    def x(self) -> np.ndarray:
        return self.origin + self.dx * np.arange(self.values.size)

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def is_zero(self) -> bool:
        return self.window is None

    @property
    def grid(self) -> Grid:
        return Grid(self.dx, self.origin, self.origin + self.dx * (self.size - 1))

    def active(self) -> tuple[np.ndarray, np.ndarray]:
        """Coordinates and values restricted to the window."""
        if self.window is None:
            return np.empty(0), np.empty(0)
        lo, hi = self.window
        return self.x[lo : hi + 1], self.values[lo : hi + 1]

    def scaled(self, factor: float) -> Field:
        if factor < 0:
            raise ValueError("scale factor must be non-negative")
        return Field(self.dx, self.origin, self.values * factor)

    def same_lattice(self, other: Field) -> bool:
        return (
            self.size == other.size
            and math.isclose(self.dx, other.dx, rel_tol=1e-12)
            and math.isclose(self.origin, other.origin, rel_tol=1e-12, abs_tol=1e-9 * self.dx)
        )

    def __add__(self, other: Field) -> Field:
        if not self.same_lattice(other):
            raise ValueError("fields live on different lattices")
        return Field(self.dx, self.origin, self.values + other.values)

    def __le__(self, other: Field) -> bool:
        if not self.same_lattice(other):
            raise ValueError("fields live on different lattices")
        return bool(np.all(self.values <= other.values))

    def __eq__(self, other) -> bool:
        if not isinstance(other, Field):
            return NotImplemented
        return (
            self.dx == other.dx
            and self.origin == other.origin
            and self.window == other.window
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    # -- serialization ------------------------------------------------------

    def to_csv(self, path: str | Path) -> Path:
        """Write ``x,value`` rows for the window plus a JSON sidecar."""
        path = Path(path)
        xs, vs = self.active()
        with open(path, "w", newline="") as fh:
            fh.write("x,value\n")
            for xv, v in zip(xs, vs):
                fh.write(f"{float(xv)!r},{float(v)!r}\n")
        sidecar = {
            "dx": self.dx,
            "origin": self.origin,
            "window": list(self.window) if self.window else None,
            "size": self.size,
        }
        path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2) + "\n")
        return path

    @classmethod
    def from_csv(cls, path: str | Path) -> Field:
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        values = np.zeros(int(meta["size"]))
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if meta["window"] is not None:
            lo, hi = meta["window"]
            values[lo : hi + 1] = data[:, 1]
        window = tuple(meta["window"]) if meta["window"] is not None else None
        return cls(float(meta["dx"]), float(meta["origin"]), values, window)


# -- initial profiles ----------------------------------------------------------


def _bump_shape(s: np.ndarray) -> np.ndarray:
    out = np.zeros_like(s, dtype=np.float64)
    inside = np.abs(s) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside] ** 2))
    return out


# integral of exp(1 - 1/(1-s^2)) over (-1, 1)
BUMP_AREA = quad(lambda s: math.exp(1.0 - 1.0 / (1.0 - s * s)), -1.0, 1.0, epsabs=1e-14)[0]


@dataclass(frozen=True)
class KinkF0:
    """``min(1, max(-x, 0))``: plateau 1 on the left, linear ramp to 0 at x=0."""

    support = None

    def __call__(self, x: np.ndarray, dx: float | None = None) -> np.ndarray:
        return np.minimum(1.0, np.maximum(-np.asarray(x, dtype=np.float64), 0.0))


@dataclass(frozen=True)
class Bump:
    """Smooth compactly supported bump of peak ``height`` on ``(center-width, center+width)``."""

    center: float = 0.0
    width: float = 1.0
    height: float = 1.0

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("bump width must be positive")
        if self.height < 0:
            raise ValueError("bump height must be non-negative")

    @classmethod
    def with_mass(cls, mass: float, center: float = 0.0, width: float = 1.0) -> Bump:
        return cls(center, width, mass / (width * BUMP_AREA))

    @property
    def mass(self) -> float:
        return self.height * self.width * BUMP_AREA

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.width, self.center + self.width)

    def __call__(self, x, dx=None):
        s = (np.asarray(x, dtype=np.float64) - self.center) / self.width
        return self.height * _bump_shape(s)


@dataclass(frozen=True)
class ConstantPsiN:
    level: float

    support = None

    def __call__(self, x, dx=None):
        return np.full(np.shape(x), float(self.level))


@dataclass(frozen=True)
class HalfLineZetaN:
    """``level`` for ``x < -ramp``, linear down to 0 on ``[-ramp, 0]``, zero for ``x >= 0``.

    ``ramp`` defaults to the grid spacing.
    """

    level: float
    ramp: float | None = None

    support = None

    def __call__(self, x, dx=None):
        ramp = self.ramp if self.ramp is not None else dx
        if ramp is None or ramp <= 0:
            raise ValueError("HalfLineZetaN needs a positive ramp width (or the grid dx)")
        x = np.asarray(x, dtype=np.float64)
        return self.level * np.clip(-x / ramp, 0.0, 1.0)


@dataclass(frozen=True)
class MirroredXiN:
    level: float
    ramp: float | None = None

    support = None

    def __call__(self, x, dx=None):
        return HalfLineZetaN(self.level, self.ramp)(-np.asarray(x, dtype=np.float64), dx)


@dataclass(frozen=True)
class GaussianKernel:
    """Heat kernel for ``u_t = u_xx``: ``(4 pi t0)^(-1/2) exp(-(x-c)^2 / (4 t0))``."""

    t0: float
    center: float = 0.0

    support = None

    def __post_init__(self):
        if self.t0 <= 0:
            raise ValueError("t0 must be positive")

    def __call__(self, x, dx=None):
        x = np.asarray(x, dtype=np.float64) - self.center
        return np.exp(-(x**2) / (4 * self.t0)) / math.sqrt(4 * math.pi * self.t0)


@dataclass(frozen=True)
class Zero:
    support = None

    def __call__(self, x, dx=None):
        return np.zeros(np.shape(x))


Profile = Union[KinkF0, Bump, ConstantPsiN, HalfLineZetaN, MirroredXiN, GaussianKernel, Zero]


def materialize(profile: Profile, grid: Grid) -> Field:
    """Sample ``profile`` at the lattice points of ``grid``."""
    support = getattr(profile, "support", None)
    if support is not None and isinstance(profile, Bump) and profile.height > 0:
        a, b = support
        if a < grid.lo or b > grid.hi:
            raise ValueError(
                f"domain [{grid.lo}, {grid.hi}] does not contain the profile support [{a}, {b}]"
            )
    x = grid.x
    values = np.asarray(profile(x, grid.dx), dtype=np.float64)
    # exp underflow in the Gaussian tails produces exact zeros; keep them
    return Field(grid.dx, grid.lo, values)


# -- functionals ---------------------------------------------------------------


def total_mass(f: Field) -> float:
    """Rectangle-rule integral ``dx * sum(values)``."""
    if f.window is None:
        return 0.0
    lo, hi = f.window
    return f.dx * float(np.sum(f.values[lo : hi + 1]))


def _test_values(f: Field, g: TestFunction, lo: int, hi: int) -> np.ndarray | float:
    if isinstance(g, Field):
        if not f.same_lattice(g):
            raise ValueError("test field lives on a different lattice")
        return g.values[lo : hi + 1]
    if callable(g):
        return np.asarray(g(f.x[lo : hi + 1]), dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.ndim == 0:
        return float(g)
    if g.shape != f.values.shape:
        raise ValueError("test array must have one value per cell")
    return g[lo : hi + 1]


def inner_product(f: Field, g: TestFunction) -> float:
    """``<f, g> = dx * sum_j f_j g(x_j)``.

    ``g`` may be a scalar, a per-cell array, a callable of ``x`` or a Field on
    the same lattice.  Only the window of ``f`` is visited; against a Field
    the intersection of both windows is used so the result is symmetric.
    """
    if f.window is None:
        return 0.0
    lo, hi = f.window
    if isinstance(g, Field):
        if g.window is None:
            return 0.0
        lo, hi = max(lo, g.window[0]), min(hi, g.window[1])
        if lo > hi:
            return 0.0
    gv = _test_values(f, g, lo, hi)
    return f.dx * float(np.sum(f.values[lo : hi + 1] * gv))


def shift(f: Field, a: float) -> Field:
    """Return ``h`` with ``h(x) = f(x + a)``, ``a`` snapped to the lattice.

    Only the origin moves, so the value multiset (and the mass) is untouched.
    """
    k = int(round(a / f.dx))
    return Field(f.dx, f.origin - k * f.dx, f.values, f.window)


def weighted_sup_norm(f: Field, lam: float) -> float:
    """``max_j f_j exp(-lam |x_j|)``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if f.window is None:
        return 0.0
    xs, vs = f.active()
    return float(np.max(vs * np.exp(-lam * np.abs(xs))))
