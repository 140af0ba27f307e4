"""Run configuration: flat INI files with one level of sections.

Example::

    [run]
    subcommand = extinction
    reps = 4000
    seed = 1

    [physics]
    theta = 1
    mode = superprocess
    profile = bump(mass=1)

    [numerics]
    dx = 0.1
    dt = 0.004
    domain = -20, 20
"""
from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any

from .field import (
    Bump, ConstantPsiN, Field, GaussianKernel, Grid, HalfLineZetaN, KinkF0, MirroredXiN,
    Zero, materialize,
)

SUBCOMMANDS = ("simulate", "duality", "extinction", "wave", "recurrence", "upper", "couple")


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _floats(n: int | None = None):
    def conv(text):
        if isinstance(text, (list, tuple)):
            vals = [float(v) for v in text]
        else:
            vals = [float(v) for v in str(text).replace("(", "").replace(")", "").split(",") if v.strip()]
        if n is not None and len(vals) != n:
            raise ValueError(f"expected {n} comma-separated numbers")
        return tuple(vals)

    return conv


def _strings(n: int):
    def conv(text):
        vals = list(text) if isinstance(text, (list, tuple)) else [v.strip() for v in str(text).split(",")]
        if len(vals) == 1:
            vals = vals * n
        if len(vals) != n:
            raise ValueError(f"expected {n} comma-separated values")
        return tuple(vals)

    return conv


def _bool(text):
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


def _key(section: str, conv=str):
    return {"section": section, "conv": conv}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str = field(default="simulate", metadata=_key("run"))
    seed: int = field(default=0, metadata=_key("run", int))
    reps: int = field(default=100, metadata=_key("run", int))
    workers: int = field(default=1, metadata=_key("run", int))
    out_dir: str = field(default="results", metadata=_key("run"))
    figures: bool = field(default=True, metadata=_key("run", _bool))

    theta: float = field(default=1.0, metadata=_key("physics", float))
    mode: str = field(default="core", metadata=_key("physics"))
    noise: bool = field(default=True, metadata=_key("physics", _bool))
    profile: str = field(default="bump(center=0, width=1, height=1)", metadata=_key("physics"))
    partner: str = field(default="bump(center=0, width=1, height=1)", metadata=_key("physics"))
    horizon: float = field(default=1.0, metadata=_key("physics", float))
    T: tuple = field(default=(20.0,), metadata=_key("physics", _floats()))
    interval: tuple = field(default=(-1.0, 1.0), metadata=_key("physics", _floats(2)))
    revisit_start: float = field(default=0.0, metadata=_key("physics", float))
    horizons: tuple = field(default=(10.0, 20.0, 40.0), metadata=_key("physics", _floats()))
    levels: tuple = field(default=(10.0, 20.0), metadata=_key("physics", _floats()))
    kind: str = field(default="full", metadata=_key("physics"))
    scaling_T: tuple = field(
        default=(0.0625, 0.125, 0.25, 0.5, 1.0), metadata=_key("physics", _floats())
    )
    scaling_level: float = field(default=20.0, metadata=_key("physics", float))
    phi: str = field(default="bump(center=0, width=1, height=1)", metadata=_key("physics"))
    coupling: str = field(default="monotone", metadata=_key("physics"))

    dx: float = field(default=0.1, metadata=_key("numerics", float))
    dt: float = field(default=0.004, metadata=_key("numerics", float))
    domain: tuple = field(default=(-20.0, 20.0), metadata=_key("numerics", _floats(2)))
    boundary: tuple = field(default=("absorbing", "absorbing"), metadata=_key("numerics", _strings(2)))
    sample_every: float | None = field(default=None, metadata=_key("numerics", _opt_float))
    scheme: str = field(default="split", metadata=_key("numerics"))
    profile_width: float = field(default=10.0, metadata=_key("numerics", float))
    fit_window: tuple = field(default=(10.0, 20.0), metadata=_key("numerics", _floats(2)))

    # -- construction -------------------------------------------------------

    @classmethod
    def from_mapping(cls, data: dict[str, Any], base: RunConfig | None = None) -> RunConfig:
        base = base or cls()
        known = {f.name: f for f in fields(cls)}
        updates = {}
        for key, raw in data.items():
            if key not in known:
                raise ConfigError(key, "unknown configuration key")
            conv = known[key].metadata["conv"]
            try:
                updates[key] = conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(key, str(exc)) from None
        cfg = replace(base, **updates)
        cfg.validate()
        return cfg

    @classmethod
    def from_ini(cls, text: str, base: RunConfig | None = None) -> RunConfig:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("<file>", str(exc)) from None
        data = {}
        for section in cp.sections():
            for key, value in cp.items(section):
                data[key] = value
        return cls.from_mapping(data, base)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for f in fields(self):
            sec = f.metadata["section"]
            if not cp.has_section(sec):
                cp.add_section(sec)
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                text = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                text = repr(v)
            else:
                text = str(v)
            cp.set(sec, f.name, text)
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    # -- validation ---------------------------------------------------------

    def validate(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError("subcommand", f"expected one of {SUBCOMMANDS}")
        if self.reps < 1:
            raise ConfigError("reps", "must be at least 1")
        if self.workers < 1:
            raise ConfigError("workers", "must be at least 1")
        if self.theta < 0:
            raise ConfigError("theta", "must be non-negative")
        if self.mode not in ("core", "superprocess"):
            raise ConfigError("mode", "expected core or superprocess")
        if not self.dx > 0:
            raise ConfigError("dx", "must be positive")
        if not self.dt > 0:
            raise ConfigError("dt", "must be positive")
        if self.dt > 0.5 * self.dx**2 * (1 + 1e-12):
            raise ConfigError("dt", f"violates dt <= dx^2/2 = {0.5 * self.dx**2:g}")
        if not self.domain[1] > self.domain[0]:
            raise ConfigError("domain", "upper end must exceed lower end")
        for b in self.boundary:
            if b not in ("absorbing", "held"):
                raise ConfigError("boundary", f"unknown boundary {b!r}")
        if self.horizon < 0:
            raise ConfigError("horizon", "must be non-negative")
        if any(t <= 0 for t in self.T):
            raise ConfigError("T", "must be positive")
        if self.sample_every is not None and not self.sample_every > 0:
            raise ConfigError("sample_every", "must be positive")
        timed = {
            "wave": ("horizon", "T"),
            "recurrence": ("horizons",),
            "upper": ("T", "scaling_T"),
        }
        for key in ("sample_every", *timed.get(self.subcommand, ("horizon",))):
            vals = getattr(self, key)
            for v in vals if isinstance(vals, tuple) else (vals,):
                if v is not None and abs(v / self.dt - round(v / self.dt)) > 1e-6:
                    raise ConfigError(key, f"{v} is not a multiple of dt={self.dt}")
        if self.scheme not in ("split", "euler"):
            raise ConfigError("scheme", "expected split or euler")
        if self.kind not in ("full", "left", "right"):
            raise ConfigError("kind", "expected full, left or right")
        if self.coupling not in ("monotone", "superprocess"):
            raise ConfigError("coupling", "expected monotone or superprocess")
        if not self.interval[0] < self.interval[1]:
            raise ConfigError("interval", "must be a non-empty open interval")
        for key in ("profile", "partner", "phi"):
            try:
                parse_profile(getattr(self, key))
            except ValueError as exc:
                raise ConfigError(key, str(exc)) from None

    @property
    def grid(self) -> Grid:
        return Grid(self.dx, self.domain[0], self.domain[1])


# -- profile specs -------------------------------------------------------------


@dataclass(frozen=True)
class SumProfile:
    parts: tuple

    def __call__(self, x, dx=None):
        return sum(p(x, dx) for p in self.parts)


_PROFILES = {
    "kink": KinkF0,
    "bump": Bump,
    "constant": ConstantPsiN,
    "zeta": HalfLineZetaN,
    "xi": MirroredXiN,
    "gaussian": GaussianKernel,
    "zero": Zero,
}
_TERM = re.compile(r"^\s*([a-z]+)\s*(?:\((.*)\))?\s*$")


def _parse_term(text: str):
    m = _TERM.match(text)
    if not m or m.group(1) not in _PROFILES:
        raise ValueError(f"cannot parse profile {text!r}; known: {sorted(_PROFILES)}")
    name, args = m.group(1), m.group(2) or ""
    kwargs = {}
    for part in filter(None, (a.strip() for a in args.split(","))):
        if "=" not in part:
            raise ValueError(f"profile argument {part!r} must be key=value")
        k, v = (s.strip() for s in part.split("=", 1))
        kwargs[k] = float(v)
    if name == "bump" and "mass" in kwargs:
        mass = kwargs.pop("mass")
        return Bump.with_mass(mass, **kwargs)
    try:
        return _PROFILES[name](**kwargs)
    except TypeError as exc:
        raise ValueError(str(exc)) from None


def parse_profile(text: str):
    """Parse e.g. ``"bump(center=8, width=1, height=2)"`` or ``"kink + bump(center=5)"``."""
    parts = [_parse_term(t) for t in text.split("+")]
    return parts[0] if len(parts) == 1 else SumProfile(tuple(parts))


def build_field(text: str, grid: Grid) -> Field:
    prof = parse_profile(text)
    parts = prof.parts if isinstance(prof, SumProfile) else (prof,)
    fld = materialize(parts[0], grid)
    for p in parts[1:]:
        fld = fld + materialize(p, grid)
    return fld


def normalized_mass_field(text: str, grid: Grid) -> Field:
    """Materialize and, for ``bump(mass=m)``, rescale so the grid mass is exactly ``m``."""
    fld = build_field(text, grid)
    m = re.search(r"mass\s*=\s*([-+0-9.eE]+)", text)
    if m and "+" not in text and not fld.is_zero:
        from .field import total_mass

        fld = fld.scaled(float(m.group(1)) / total_mass(fld))
    return fld


def parse_assignments(items: list[str]) -> dict[str, str]:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out
