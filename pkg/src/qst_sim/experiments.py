"""
Transfer efficiency, parameter sweeps and the adiabatic-limit formulas.

Efficiency is |m2(T)|^2 for a unit excitation initially in m1.  The dynamics
are linear, so that choice of initial amplitude loses no generality.
"""

import logging
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    Protocol,
    SystemConfig,
    ValidityWarning,
    build_generator,
    fsr_from_length,
    multimode_generator,
    zero_mode_three_mode_fiber,
)
from .integrator import IntegratorSettings, Trajectory, propagate
from .pulses import PulseParams, reference_pulses

log = logging.getLogger(__name__)

THREADS_ENV = "QST_SIM_THREADS"


@dataclass(frozen=True)
class EfficiencyResult:
    epsilon: float
    final_populations: np.ndarray
    residual_fiber_population: float
    dissipated: float
    labels: tuple
    trajectory: Trajectory = None
    runtime: float = 0.0
    steps: int = 0

    @property
    def residual_mechanical_population(self):
        """Population left in m1 at t = T."""
        return float(self.final_populations[0])

    @property
    def balance(self):
        """epsilon + leftover populations + dissipated fraction; 1 up to rounding."""
        return float(self.final_populations.sum() + self.dissipated)


def initial_state(dim):
    v = np.zeros(dim, dtype=complex)
    v[0] = 1.0
    return v


def transfer_efficiency(p, c, settings=IntegratorSettings(), keep_trajectory=True):
    """Propagate a unit excitation from m1 and report |m2(T)|^2."""
    started = time.perf_counter()
    gen = build_generator(p, c)
    traj = propagate(gen, initial_state(gen.dim), settings)
    pops = np.abs(traj.final) ** 2
    return EfficiencyResult(
        epsilon=float(pops[-1]),
        final_populations=pops,
        residual_fiber_population=float(pops[1:-1].sum()),
        dissipated=float(1.0 - pops.sum()),
        labels=gen.labels,
        trajectory=traj if keep_trajectory else None,
        runtime=time.perf_counter() - started,
        steps=traj.steps,
    )


def _sigma_check(p):
    if not np.isclose(p.sigma_ratio, 0.125, rtol=1e-9, atol=0.0):
        warnings.warn(
            f"the adiabatic-limit formula assumes sigma = T/8, got sigma = {p.sigma_ratio:.4g} T",
            stacklevel=3,
        )


def _decay_exponent(p, c):
    gamma, lam, T = c.gamma_fib, p.lambda0, p.duration
    nonadiabatic = gamma * np.pi**2 / (lam**2 * T)
    odd_modes = gamma * lam**2 * T / (8.0 * c.delta_fsr**2) if np.isfinite(c.delta_fsr) else 0.0
    return nonadiabatic + odd_modes


def analytic_dark_mode_decay(p, c):
    """A0(T)/A0(0) in the adiabatic limit (sigma = T/8)."""
    _sigma_check(p)
    return float(np.exp(-0.5 * _decay_exponent(p, c)))


def analytic_efficiency(p, c):
    """exp(-gamma pi^2/(lambda0^2 T) - gamma lambda0^2 T/(8 delta_fsr^2))."""
    _sigma_check(p)
    return float(np.exp(-_decay_exponent(p, c)))


def optimal_duration(lambda0, c):
    """Duration that balances the two loss channels of ``analytic_efficiency``."""
    return 2.0 * np.sqrt(2.0) * np.pi * c.delta_fsr / lambda0**2


def at_mode_overlap(p, c, settings=IntegratorSettings()):
    """Overlap of the lossless N = 1 trajectory with the instantaneous zero mode.

    Returns ``(times, overlap)`` with overlap = |<A0(t)|V(t)>| / |V(t)|.
    """
    lossless = c.replace(n_pairs=1, gamma_fib=0.0, gamma_m=0.0, protocol=Protocol.AP)
    gen = multimode_generator(p, lossless)
    traj = propagate(gen, initial_state(gen.dim), settings)
    ps = reference_pulses(traj.times, p)
    overlap = np.empty(traj.times.size)
    for i, (g1, g2) in enumerate(zip(ps.g1, ps.g2)):
        mode = zero_mode_three_mode_fiber(g1, g2, c.delta_fsr)
        overlap[i] = abs(np.vdot(mode, traj.states[i])) / np.linalg.norm(traj.states[i])
    return traj.times, overlap


# --------------------------------------------------------------------------- sweeps

AXIS_NAMES = ("duration", "lambda0", "fiber_length", "delta_fsr", "gamma_fib", "gamma_m")


@dataclass(frozen=True)
class Axis:
    name: str
    start: float
    stop: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown sweep axis {self.name!r}; expected one of {AXIS_NAMES}")
        if self.count < 2:
            raise ValueError(f"axis {self.name!r} needs at least 2 points")
        if not self.start < self.stop:
            raise ValueError(f"axis {self.name!r} bounds must be increasing")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"axis scale must be 'linear' or 'log', got {self.scale!r}")
        if self.scale == "log" and self.start <= 0:
            raise ValueError("log axes need positive bounds")

    @property
    def values(self):
        if self.scale == "log":
            return np.geomspace(self.start, self.stop, self.count)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SweepSpec:
    """Grid over one or two axes around a baseline.

    sigma is recomputed as ``sigma_ratio * T`` at every point.
    """

    axes: tuple
    pulse: PulseParams
    system: SystemConfig
    protocols: tuple = (Protocol.AP,)
    sigma_ratio: float = 0.125
    settings: IntegratorSettings = field(default_factory=IntegratorSettings)

    def __post_init__(self):
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "protocols", tuple(Protocol(x) for x in self.protocols))
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate sweep axes: {names}")


def point_params(spec, values, protocol=None, n_pairs=None):
    """(PulseParams, SystemConfig) at one grid point; ``values`` maps axis name to value."""
    pulse, system = spec.pulse, spec.system
    duration = values.get("duration", pulse.duration)
    pulse = PulseParams(values.get("lambda0", pulse.lambda0), duration, spec.sigma_ratio * duration)
    changes = {}
    if "fiber_length" in values:
        changes["delta_fsr"] = fsr_from_length(values["fiber_length"])
    for name in ("delta_fsr", "gamma_fib", "gamma_m"):
        if name in values:
            changes[name] = values[name]
    if protocol is not None:
        changes["protocol"] = protocol
    if n_pairs is not None:
        changes["n_pairs"] = n_pairs
    return pulse, system.replace(**changes)


def resolve_threads(threads=None):
    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "1") or 1)
    if threads < 1:
        raise ValueError(f"thread count must be >= 1, got {threads}")
    return threads


def _efficiency_only(task):
    p, c, settings = task
    return transfer_efficiency(p, c, settings, keep_trajectory=False).epsilon


def run_tasks(tasks, threads=None):
    """Evaluate ``(PulseParams, SystemConfig, settings)`` tasks; results keep task order."""
    threads = resolve_threads(threads)
    tasks = list(tasks)
    if threads == 1 or len(tasks) < 2:
        return np.array([_efficiency_only(t) for t in tasks])
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return np.array(list(pool.map(_efficiency_only, tasks)))


def sweep_1d(spec, threads=None):
    """Efficiency along a single axis for each protocol.

    Returns a dict: axis name -> axis values, protocol name -> efficiencies.
    """
    if len(spec.axes) != 1:
        raise ValueError("sweep_1d expects exactly one axis")
    (axis,) = spec.axes
    xs = axis.values
    tasks = [
        point_params(spec, {axis.name: x}, protocol) + (spec.settings,)
        for protocol in spec.protocols
        for x in xs
    ]
    eps = run_tasks(tasks, threads).reshape(len(spec.protocols), xs.size)
    table = {axis.name: xs}
    for protocol, row in zip(spec.protocols, eps):
        table[protocol.value] = row
    return table


def sweep_duration(spec, threads=None):
    """Efficiency against T for each protocol.

    Returns a dict: ``"duration"`` -> T values, protocol name -> efficiencies.
    """
    if [a.name for a in spec.axes] != ["duration"]:
        raise ValueError("sweep_duration expects a single 'duration' axis")
    return sweep_1d(spec, threads)


def sweep_2d(spec, threads=None):
    """Efficiency on a (first axis) x (second axis) grid for each protocol.

    Returns ``(x_values, y_values, {protocol name: array of shape (nx, ny)})``.
    """
    if len(spec.axes) != 2:
        raise ValueError("sweep_2d expects exactly two axes")
    ax, ay = spec.axes
    xs, ys = ax.values, ay.values
    tasks = [
        point_params(spec, {ax.name: x, ay.name: y}, protocol) + (spec.settings,)
        for protocol in spec.protocols
        for x in xs
        for y in ys
    ]
    eps = run_tasks(tasks, threads).reshape(len(spec.protocols), xs.size, ys.size)
    return xs, ys, {protocol.value: grid for protocol, grid in zip(spec.protocols, eps)}


def sweep_fiber_length(spec, n_pairs=(1, 9), threads=None):
    """Inefficiency 1 - eps against fiber length, simulated and analytic.

    Returns a dict with ``"fiber_length"``, ``"N<k>"`` for every k in
    ``n_pairs`` and ``"analytic"``.
    """
    (axis,) = spec.axes
    if axis.name != "fiber_length":
        raise ValueError("sweep_fiber_length expects a single 'fiber_length' axis")
    Ls = axis.values
    protocol = spec.protocols[0]
    tasks = [
        point_params(spec, {"fiber_length": L}, protocol, n) + (spec.settings,)
        for n in n_pairs
        for L in Ls
    ]
    eps = run_tasks(tasks, threads).reshape(len(n_pairs), Ls.size)
    table = {"fiber_length": Ls}
    for n, row in zip(n_pairs, eps):
        table[f"N{n}"] = 1.0 - row
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        table["analytic"] = np.array(
            [1.0 - analytic_efficiency(*point_params(spec, {"fiber_length": L})) for L in Ls]
        )
    return table


@dataclass(frozen=True)
class Variant:
    """One model column of a duration sweep: protocol plus fiber size."""

    label: str
    protocol: Protocol = Protocol.AP
    n_pairs: int = 0


def sweep_variants(spec, variants, threads=None):
    """Efficiency against T for arbitrary (protocol, n_pairs) combinations.

    Returns a dict: ``"duration"`` -> T values, variant label -> efficiencies.
    """
    (axis,) = spec.axes
    if axis.name != "duration":
        raise ValueError("sweep_variants expects a single 'duration' axis")
    Ts = axis.values
    tasks = [
        point_params(spec, {"duration": T}, v.protocol, v.n_pairs) + (spec.settings,)
        for v in variants
        for T in Ts
    ]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        eps = run_tasks(tasks, threads).reshape(len(variants), Ts.size)
    table = {"duration": Ts}
    for v, row in zip(variants, eps):
        table[v.label] = row
    return table
