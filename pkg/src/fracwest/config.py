"""Key-value run configuration and the named experiment scenarios."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import Manufactured2D
from .exceptions import ConfigError, FracWestError
from .fem import build_space, interval_mesh, square_mesh
from .kernels import KernelSpec
from .stepper import RunConfig

__all__ = ["Settings", "Scenario", "SCENARIOS", "parse_config", "parse_value", "grid_horizon"]

SCENARIOS = (
    "test1-convergence",
    "test2-vary-k",
    "test3-vary-a",
    "test4-vary-mu",
    "test5-vary-r",
    "conv2d",
)


@dataclass(frozen=True)
class Settings:
    """Fully resolved scalar parameters of a scenario."""

    a: float = 1.0
    k: float = 0.09
    mu: float = 0.5
    r: float = 0.0
    kernel: str = "A"
    corrected: bool = False
    T: float = 4.0
    dt: float = 0.01
    M: int = 400
    xa: float = 0.0
    xb: float = 20.0
    newton_tol: float = 1e-10
    newton_max: int = 20
    # convergence studies
    dts: tuple = ()
    ref_factor: int = 16
    # parameter sweeps: values of ``sweep_key`` crossed with values of ``pair_key``
    sweep: tuple = ()
    pair: tuple = ()
    snapshot_every: float = 0.8
    # initial Gaussian u0 = amplitude * exp(-(x - center)^2 / 2)
    amplitude: float = 5.0
    center: float = 10.0


_SWEEP_KEYS = {
    "test1-convergence": ("mu", None),
    "test2-vary-k": ("k", "a"),
    "test3-vary-a": ("a", None),
    "test4-vary-mu": ("mu", "k"),
    "test5-vary-r": ("r", "k"),
    "conv2d": (None, None),
}

_DEFAULTS = {
    "test1-convergence": dict(
        a=30.0, k=0.09, r=0.0, T=0.5, xa=-1.0, xb=1.0, M=400,
        dts=(1 / 25, 1 / 50, 1 / 100, 1 / 200), dt=1 / 100, sweep=(0.25, 0.75),
    ),
    "test2-vary-k": dict(sweep=(0.0, 0.03, 0.06, 0.09), pair=(0.0, 1.0)),
    "test3-vary-a": dict(
        xb=40.0, M=800, center=20.0, sweep=(0.0, 0.1, 1.0, 10.0),
    ),
    "test4-vary-mu": dict(a=1.0, sweep=(0.1, 0.25, 0.5, 0.75, 0.9), pair=(0.0, 0.09)),
    "test5-vary-r": dict(a=1.0, mu=0.5, sweep=(0.0, 1.0, 5.0, 25.0), pair=(0.0, 0.09)),
    "conv2d": dict(
        a=1.0, k=0.09, mu=0.5, r=0.0, T=0.5, xa=-1.0, xb=1.0, M=32,
        dts=(1 / 40, 1 / 80, 1 / 160), dt=1 / 40,
    ),
}

_FIELD_TYPES = {f.name: f.type for f in fields(Settings)}


def grid_horizon(T, dt):
    """Largest multiple of ``dt`` that does not exceed ``T``."""
    n = math.floor(T / dt + 1e-9)
    if n < 1:
        raise ConfigError(f"dt = {dt} exceeds T = {T}")
    return n * dt


def _parse_float(text):
    text = text.strip()
    if "/" in text:
        return float(Fraction(text))
    return float(text)


def parse_value(key, text):
    """Convert the string ``text`` to the type of setting ``key``."""
    kind = _FIELD_TYPES.get(key)
    if kind is None:
        raise ConfigError(f"unknown key {key!r}")
    text = text.strip()
    try:
        if kind == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind == "int":
            value = _parse_float(text)
            if value != int(value):
                raise ValueError(text)
            return int(value)
        if kind == "float":
            return _parse_float(text)
        if kind == "str":
            return text
        if kind == "tuple":
            return tuple(_parse_float(v) for v in text.split(",") if v.strip())
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"bad value {text!r} for {key}") from exc
    raise AssertionError(kind)


def _validate(s: Settings):
    if not 0.0 < s.mu < 1.0:
        raise ConfigError(f"mu = {s.mu} outside (0, 1)")
    if s.kernel.upper() not in ("A", "B"):
        raise ConfigError(f"kernel must be A or B, got {s.kernel!r}")
    for name in ("a", "k", "r"):
        if getattr(s, name) < 0:
            raise ConfigError(f"{name} must be nonnegative")
    for name in ("T", "dt", "newton_tol"):
        if not getattr(s, name) > 0:
            raise ConfigError(f"{name} must be positive")
    if not s.xb > s.xa:
        raise ConfigError("need xb > xa")
    if s.M < 1 or s.newton_max < 1 or s.ref_factor < 1:
        raise ConfigError("M, newton_max and ref_factor must be at least 1")
    if any(not v > 0 for v in s.dts):
        raise ConfigError("dts must be positive")


@dataclass(frozen=True)
class Scenario:
    """A named experiment with its resolved settings."""

    name: str
    settings: Settings
    overrides: dict = field(default_factory=dict)
    out_dir: Optional[str] = None

    @property
    def sweep_key(self):
        return _SWEEP_KEYS[self.name][0]

    @property
    def pair_key(self):
        return _SWEEP_KEYS[self.name][1]

    @property
    def is_convergence(self):
        return self.name in ("test1-convergence", "conv2d")

    @property
    def dim(self):
        return 2 if self.name == "conv2d" else 1

    def space(self, settings=None):
        s = self.settings if settings is None else settings
        mesh = square_mesh(s.xa, s.xb, s.M) if self.dim == 2 else interval_mesh(s.xa, s.xb, s.M)
        return build_space(mesh)

    def initial_data(self, s):
        """``(u0, v0, laplacian, source, exact)`` callables for settings ``s``."""
        if self.name == "conv2d":
            m = Manufactured2D(a=s.a, k=s.k, mu=s.mu)
            return m.u0, m.v0, m.u0_laplacian, m.source, m.u
        if self.name == "test1-convergence":
            def u0(p):
                return np.sin(np.pi * p[:, 0])

            def lap(p):
                return -np.pi**2 * np.sin(np.pi * p[:, 0])

            return u0, u0, lap, None, None
        amp, c = s.amplitude, s.center

        def gauss(p):
            return amp * np.exp(-0.5 * (p[:, 0] - c) ** 2)

        def gauss_lap(p):
            x = p[:, 0] - c
            return amp * np.exp(-0.5 * x**2) * (x**2 - 1.0)

        def zero(p):
            return np.zeros(p.shape[0])

        return gauss, zero, gauss_lap, None, None

    def run_config(self, space=None, settings=None, **overrides):
        """Build a :class:`RunConfig` from the settings plus ``overrides``."""
        s = replace(self.settings if settings is None else settings, **overrides)
        _validate(s)
        space = self.space(s) if space is None else space
        u0, v0, lap, source, _ = self.initial_data(s)
        if self.is_convergence:
            # each step size runs to the last grid time not beyond T
            s = replace(s, T=grid_horizon(s.T, s.dt))
        try:
            kernel = KernelSpec(s.kernel, s.mu, s.r)
            return RunConfig(
                space=space, u0=u0, v0=v0, T=s.T, dt=s.dt, a=s.a, k=s.k,
                kernel=kernel, corrected=s.corrected, u0_laplacian=lap,
                source=source, newton_tol=s.newton_tol, newton_max=s.newton_max,
            )
        except FracWestError as exc:
            raise ConfigError(str(exc)) from exc

    def runs(self):
        """``(label, settings)`` pairs of the parameter sweep."""
        s = self.settings
        key, pair = self.sweep_key, self.pair_key
        if key is None:
            return [(self.name, s)]
        values = s.sweep or (getattr(s, key),)
        pairs = s.pair if pair else ()
        out = []
        for v in values:
            if pairs:
                for w in pairs:
                    out.append((f"{self.name}_{key}{v:g}_{pair}{w:g}", replace(s, **{key: v, pair: w})))
            else:
                out.append((f"{self.name}_{key}{v:g}", replace(s, **{key: v})))
        return out

    def snapshot_times(self, s=None):
        s = self.settings if s is None else s
        step = s.snapshot_every
        n = int(math.floor(s.T / step + 1e-9))
        times = [i * step for i in range(n + 1)]
        if not math.isclose(times[-1], s.T):
            times.append(s.T)
        return times


def parse_config(text: str = "", scenario: Optional[str] = None, overrides=None):
    """Parse a ``key = value`` document into ``(RunConfig, Scenario)``.

    ``#`` starts a comment. A ``scenario`` key in the document is used when
    the argument is omitted (default ``test1-convergence``). ``overrides``
    maps keys to strings and wins over the document.
    """
    entries = {}
    name = scenario
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", line=lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key == "scenario":
            name = name or value
            continue
        try:
            entries[key] = parse_value(key, value)
        except ConfigError as exc:
            raise ConfigError(str(exc), line=lineno) from None
    for key, value in (overrides or {}).items():
        entries[key] = parse_value(key, value) if isinstance(value, str) else value
    name = name or "test1-convergence"
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")

    base = dict(_DEFAULTS[name])
    sweep_key = _SWEEP_KEYS[name][0]
    if sweep_key in entries and "sweep" not in entries:
        base["sweep"] = (entries[sweep_key],)
    base.update(entries)
    settings = Settings(**base)
    if "kernel" in entries:
        settings = replace(settings, kernel=settings.kernel.upper())
    _validate(settings)
    sc = Scenario(name, settings, overrides=dict(entries))
    first = sc.runs()[0][1]
    return sc.run_config(settings=first), sc
