"""
Flat ``key = value`` scenario configuration.

One assignment per line, ``#`` starts a comment.  Frequencies are given as
cyclic values in Hz (the rate divided by 2*pi) and durations in ns, the way
experimental numbers are quoted; :meth:`ScenarioConfig.pulse` and
:meth:`ScenarioConfig.system` convert to the angular SI values used by the
library.

Sweep axes are written as ``sweep_<axis>_<unit> = start, stop, count[, log]``.
"""

from dataclasses import dataclass, fields, replace

import numpy as np

from .dynamics import Protocol, SystemConfig, fsr_from_length
from .experiments import Axis
from .pulses import TWO_PI, PulseParams, characteristic_time


class ConfigError(ValueError):
    """Invalid configuration; the message carries file, line and key."""


# sweep key -> (axis name, factor to SI); "t0" durations are scaled later
SWEEP_KEYS = {
    "sweep_duration_ns": ("duration", 1e-9),
    "sweep_duration_t0": ("duration", None),
    "sweep_lambda0_hz": ("lambda0", TWO_PI),
    "sweep_fiber_length_m": ("fiber_length", 1.0),
    "sweep_delta_fsr_hz": ("delta_fsr", TWO_PI),
    "sweep_gamma_fib_hz": ("gamma_fib", TWO_PI),
    "sweep_gamma_m_hz": ("gamma_m", TWO_PI),
}


@dataclass(frozen=True)
class SweepAxis:
    key: str
    start: float
    stop: float
    count: int
    scale: str = "linear"

    def to_axis(self, lambda0):
        name, factor = SWEEP_KEYS[self.key]
        if factor is None:
            factor = characteristic_time(lambda0)
        return Axis(name, self.start * factor, self.stop * factor, self.count, self.scale)

    def text(self):
        return f"{self.start:.12g}, {self.stop:.12g}, {self.count}, {self.scale}"


@dataclass(frozen=True)
class ScenarioConfig:
    protocol: Protocol = Protocol.AP
    lambda0_hz: float = 10e6
    duration_ns: float = 250.0
    duration_t0: float = None
    sigma_ratio: float = 0.125
    gamma_fib_hz: float = 0.0
    gamma_m_hz: float = 0.0
    delta_fsr_hz: float = None
    fiber_length_m: float = None
    n_pairs: int = 0
    steps: int = None
    sweeps: tuple = ()
    protocols: tuple = ()
    output: str = None

    def pulse(self):
        """PulseParams; ``duration_t0`` (T in units of T0) wins over ``duration_ns``."""
        lam = TWO_PI * self.lambda0_hz
        if self.duration_t0 is not None:
            duration = self.duration_t0 * characteristic_time(lam)
        else:
            duration = self.duration_ns * 1e-9
        return PulseParams(lam, duration, self.sigma_ratio * duration)

    def system(self):
        if self.fiber_length_m is not None:
            delta = fsr_from_length(self.fiber_length_m)
        elif self.delta_fsr_hz is not None:
            delta = TWO_PI * self.delta_fsr_hz
        else:
            delta = np.inf
        return SystemConfig(
            gamma_fib=TWO_PI * self.gamma_fib_hz,
            gamma_m=TWO_PI * self.gamma_m_hz,
            delta_fsr=delta,
            n_pairs=self.n_pairs,
            protocol=self.protocol,
        )

    def axes(self):
        lam = TWO_PI * self.lambda0_hz
        return tuple(s.to_axis(lam) for s in self.sweeps)

    def replace(self, **changes):
        return replace(self, **changes)

    def lines(self):
        """Resolved configuration as ``key = value`` strings, in field order."""
        out = []
        for f in fields(self):
            value = getattr(self, f.name)
            if f.name == "sweeps":
                out.extend(f"{s.key} = {s.text()}" for s in value)
            elif f.name == "protocols":
                if value:
                    out.append("protocols = " + ", ".join(p.value for p in value))
            elif value is not None:
                out.append(f"{f.name} = {_text(value)}")
        return out


def _text(value):
    if isinstance(value, Protocol):
        return value.value
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


_FLOAT_KEYS = {"lambda0_hz", "duration_ns", "duration_t0", "sigma_ratio", "gamma_fib_hz", "gamma_m_hz", "delta_fsr_hz", "fiber_length_m"}
_POSITIVE = {"lambda0_hz", "duration_ns", "duration_t0", "sigma_ratio", "delta_fsr_hz", "fiber_length_m"}
_INT_KEYS = {"n_pairs", "steps"}


def _parse_float(raw, key):
    try:
        value = float(raw)
    except ValueError:
        raise ValueError(f"expected a number, got {raw!r}") from None
    if not np.isfinite(value):
        raise ValueError(f"expected a finite number, got {raw!r}")
    if key in _POSITIVE and value <= 0:
        raise ValueError(f"must be positive, got {raw}")
    if value < 0:
        raise ValueError(f"must be non-negative, got {raw}")
    return value


def _parse_int(raw, key):
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"expected an integer, got {raw!r}") from None
    if value < 0:
        raise ValueError(f"must be non-negative, got {raw}")
    if key == "steps" and value < 16:
        raise ValueError(f"must be at least 16, got {raw}")
    return value


def _parse_protocol(raw):
    try:
        return Protocol(raw.strip().upper())
    except ValueError:
        names = ", ".join(p.value for p in Protocol)
        raise ValueError(f"unknown protocol {raw!r}; expected one of {names}") from None


def _parse_sweep(raw, key):
    parts = [x.strip() for x in raw.split(",")]
    if len(parts) not in (3, 4):
        raise ValueError("expected 'start, stop, count[, linear|log]'")
    start, stop = _parse_float(parts[0], key), _parse_float(parts[1], key)
    count = _parse_int(parts[2], key)
    scale = parts[3].lower() if len(parts) == 4 else "linear"
    axis = SweepAxis(key, start, stop, count, scale)
    Axis(SWEEP_KEYS[key][0], start, stop, count, scale)  # validates bounds, count, scale
    return axis


def parse_config(text, source="<config>", base=None):
    """Parse ``text`` on top of ``base`` (defaults to :class:`ScenarioConfig()`).

    Raises
    ------
    ConfigError
        With ``source:line: key: problem`` for the first bad line, or naming
        both keys when ``delta_fsr_hz`` and ``fiber_length_m`` are both set.
    """
    base = base if base is not None else ScenarioConfig()
    values = {}
    seen = {}
    sweeps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        where = f"{source}:{lineno}"
        if "=" not in stripped:
            raise ConfigError(f"{where}: expected 'key = value', got {stripped!r}")
        key, raw = (x.strip() for x in stripped.split("=", 1))
        if key in seen:
            raise ConfigError(f"{where}: {key}: duplicate key (first set on line {seen[key]})")
        seen[key] = lineno
        if not raw:
            raise ConfigError(f"{where}: {key}: missing value")
        try:
            if key in _FLOAT_KEYS:
                values[key] = _parse_float(raw, key)
            elif key in _INT_KEYS:
                values[key] = _parse_int(raw, key)
            elif key == "protocol":
                values[key] = _parse_protocol(raw)
            elif key == "protocols":
                values[key] = tuple(_parse_protocol(x) for x in raw.split(","))
            elif key == "output":
                values[key] = raw
            elif key in SWEEP_KEYS:
                sweeps.append(_parse_sweep(raw, key))
            else:
                raise ValueError("unknown key")
        except ValueError as exc:
            raise ConfigError(f"{where}: {key}: {exc}") from None

    if "delta_fsr_hz" in seen and "fiber_length_m" in seen:
        raise ConfigError(
            f"{source}: delta_fsr_hz (line {seen['delta_fsr_hz']}) and fiber_length_m "
            f"(line {seen['fiber_length_m']}) are mutually exclusive; set only one"
        )
    if "duration_ns" in seen and "duration_t0" in seen:
        raise ConfigError(
            f"{source}: duration_ns (line {seen['duration_ns']}) and duration_t0 "
            f"(line {seen['duration_t0']}) are mutually exclusive; set only one"
        )
    # a setting in the file replaces whichever alternative the base carried
    for key, other in (("delta_fsr_hz", "fiber_length_m"), ("fiber_length_m", "delta_fsr_hz"),
                       ("duration_ns", "duration_t0")):
        if key in seen:
            values[other] = None
    names = [SWEEP_KEYS[s.key][0] for s in sweeps]
    if len(set(names)) != len(names):
        raise ConfigError(f"{source}: more than one sweep given for the same parameter: {names}")
    if len(sweeps) > 2:
        raise ConfigError(f"{source}: at most two sweep axes are supported, got {len(sweeps)}")
    if sweeps:
        values["sweeps"] = tuple(sweeps)
    config = replace(base, **values)
    _check_consistency(config, source)
    return config


def _check_consistency(config, source):
    try:
        config.pulse()
        config.system()
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path, base=None):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read configuration: {exc.strerror}") from None
    return parse_config(text, str(path), base)


def require_fiber(config, source="<config>"):
    """Custom runs must name exactly one of delta_fsr_hz / fiber_length_m."""
    if config.delta_fsr_hz is None and config.fiber_length_m is None:
        raise ConfigError(f"{source}: one of delta_fsr_hz or fiber_length_m is required")
