"""
Named scenarios with their published parameter sets, plus ``custom``.

Every scenario takes a resolved :class:`ScenarioConfig` and returns a
:class:`ScenarioOutput`: the tables to write as CSV, the panels for the plot
description and a one-line summary.  The first table is ``<scenario>.csv``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .config import ConfigError, ScenarioConfig, SweepAxis, require_fiber
from .dynamics import Protocol, ValidityWarning
from .experiments import (
    SweepSpec,
    Variant,
    sweep_1d,
    sweep_2d,
    sweep_duration,
    sweep_fiber_length,
    sweep_variants,
    transfer_efficiency,
)
from .integrator import IntegratorSettings
from .pulses import TWO_PI, modified_pulses, reference_pulses
from .report import HeatmapPanel, LinePanel, Series, Table

ALL_PROTOCOLS = (Protocol.AP, Protocol.STAP_CD, Protocol.STAP_MOD)
FIG3_EXTRA_SIGMA_RATIO = 1.0 / 6.0
FIG7_CAPTION_SIGMA_RATIO = 0.25

DEFAULTS = {
    "fig2": ScenarioConfig(lambda0_hz=10e6, duration_ns=250.0, sigma_ratio=0.125),
    "fig3": ScenarioConfig(lambda0_hz=10e6, duration_ns=250.0, sigma_ratio=0.125, gamma_fib_hz=22e3),
    "fig4": ScenarioConfig(
        lambda0_hz=10e6, sigma_ratio=0.125, gamma_fib_hz=22e3,
        sweeps=(SweepAxis("sweep_duration_t0", 0.5, 20.0, 40),), protocols=ALL_PROTOCOLS,
    ),
    "fig5": ScenarioConfig(
        lambda0_hz=10e6, sigma_ratio=0.125, gamma_fib_hz=22e3,
        sweeps=(SweepAxis("sweep_duration_ns", 31.25, 1000.0, 32), SweepAxis("sweep_lambda0_hz", 2e6, 64e6, 32)),
        protocols=ALL_PROTOCOLS,
    ),
    "fig6": ScenarioConfig(
        lambda0_hz=10e6, sigma_ratio=0.125, gamma_fib_hz=22e3, delta_fsr_hz=10e6,
        sweeps=(SweepAxis("sweep_duration_t0", 0.5, 20.0, 40),),
    ),
    "fig7": ScenarioConfig(
        lambda0_hz=1e6, duration_t0=20.0, sigma_ratio=0.125, gamma_fib_hz=1.5e3,
        sweeps=(SweepAxis("sweep_fiber_length_m", 10.0, 1000.0, 21, "log"),),
    ),
    "custom": ScenarioConfig(),
}

# the inset of the fiber-length figure
FIG7_INSET = {"lambda0_hz": 10e6, "gamma_fib_hz": 22e3}

SCENARIOS = tuple(DEFAULTS)

# sweep axis -> (CSV column, factor from SI, plot label)
AXIS_COLUMNS = {
    "duration": ("T_ns", 1e9, "T (ns)"),
    "lambda0": ("lambda0_mhz", 1 / (TWO_PI * 1e6), "lambda0 / 2pi (MHz)"),
    "fiber_length": ("L_m", 1.0, "fiber length (m)"),
    "delta_fsr": ("delta_fsr_mhz", 1 / (TWO_PI * 1e6), "delta_fsr / 2pi (MHz)"),
    "gamma_fib": ("gamma_fib_khz", 1 / (TWO_PI * 1e3), "gamma_fib / 2pi (kHz)"),
    "gamma_m": ("gamma_m_khz", 1 / (TWO_PI * 1e3), "gamma_m / 2pi (kHz)"),
}


@dataclass
class ScenarioOutput:
    tables: list
    panels: list
    summary: str


def _settings(config):
    return IntegratorSettings(steps=config.steps)


def _comments(scenario, config, extra=()):
    return [f"scenario = {scenario}"] + config.lines() + list(extra)


def _spec(config, protocols=None):
    return SweepSpec(
        axes=config.axes(),
        pulse=config.pulse(),
        system=config.system(),
        protocols=protocols or config.protocols or (config.protocol,),
        sigma_ratio=config.sigma_ratio,
        settings=_settings(config),
    )


def _single_axis(config, name, scenario):
    axes = config.axes()
    if len(axes) != 1 or axes[0].name != name:
        raise ConfigError(f"{scenario}: expects exactly one {name} sweep")
    return axes[0]


def _fmt(x):
    return f"{x:.6g}"


# --------------------------------------------------------------------------- figures

def run_fig2(config, threads=None):
    """Reference and reshaped pulse shapes (couplings as cyclic MHz)."""
    p = config.pulse()
    t = np.linspace(0.0, p.duration, 501)
    ps, mp = reference_pulses(t, p), modified_pulses(t, p)
    to_mhz = 1.0 / (TWO_PI * 1e6)
    table = Table(
        "fig2",
        {
            "t_ns": t * 1e9,
            "g1_mhz": ps.g1 * to_mhz,
            "g2_mhz": ps.g2 * to_mhz,
            "g1_mod_mhz": mp.g1_mod * to_mhz,
            "g2_mod_mhz": mp.g2_mod * to_mhz,
            "g_a_mhz": mp.g_a * to_mhz,
        },
        _comments("fig2", config),
    )
    panels = [
        LinePanel(table, [Series("g1", "t_ns", "g1_mhz"), Series("g2", "t_ns", "g2_mhz", "--")],
                  "t (ns)", "coupling / 2pi (MHz)", "reference pulses"),
        LinePanel(table, [Series("g1 reshaped", "t_ns", "g1_mod_mhz"), Series("g2 reshaped", "t_ns", "g2_mod_mhz", "--")],
                  "t (ns)", "coupling / 2pi (MHz)", "reshaped pulses"),
    ]
    return ScenarioOutput([table], panels, f"fig2: {table.n_rows} samples, peak g1 reshaped {_fmt(table.columns['g1_mod_mhz'].max())} MHz")


def run_fig3(config, threads=None):
    """|m2(t)|^2 during one transfer for each protocol at two pulse widths."""
    columns = {}
    panels_series = []
    finals = {}
    for ratio in (FIG3_EXTRA_SIGMA_RATIO, config.sigma_ratio):
        tag = _width_tag(ratio)
        series = []
        for protocol in ALL_PROTOCOLS:
            c = config.replace(sigma_ratio=ratio, protocol=protocol)
            r = transfer_efficiency(c.pulse(), c.system(), _settings(c))
            if "t_ns" not in columns:
                columns["t_ns"] = r.trajectory.times * 1e9
            name = f"eps_{protocol.value}_sigma_{tag}"
            columns[name] = r.trajectory.populations[:, -1]
            finals[name] = r.epsilon
            series.append(Series(protocol.value, "t_ns", name))
        panels_series.append((ratio, series))
    table = Table("fig3", columns, _comments("fig3", config, [f"sigma_ratio_extra = {FIG3_EXTRA_SIGMA_RATIO:.12g}"]))
    panels = [
        LinePanel(table, series, "t (ns)", "|m2(t)|^2", f"sigma = {ratio:.4g} T")
        for ratio, series in panels_series
    ]
    summary = "fig3: final " + ", ".join(f"{k} = {_fmt(v)}" for k, v in finals.items())
    return ScenarioOutput([table], panels, summary)


def _width_tag(ratio):
    inverse = 1.0 / ratio
    if abs(inverse - round(inverse)) < 1e-9:
        return f"t{round(inverse)}"
    return "r" + f"{ratio:.4g}".replace(".", "p")


def run_fig4(config, threads=None):
    """Efficiency against T for AP and both STAP constructions."""
    _single_axis(config, "duration", "fig4")
    result = sweep_duration(_spec(config), threads)
    columns = {"T_ns": result["duration"] * 1e9}
    for protocol in _spec(config).protocols:
        columns[f"eps_{protocol.value}"] = result[protocol.value]
    table = Table("fig4", columns, _comments("fig4", config))
    series = [Series(k[4:], "T_ns", k) for k in columns if k != "T_ns"]
    panel = LinePanel(table, series, "T (ns)", "efficiency", "single-mode fiber")
    worst = {k: _fmt(v.min()) for k, v in columns.items() if k != "T_ns"}
    return ScenarioOutput([table], [panel], f"fig4: {table.n_rows} durations, min " + ", ".join(f"{k} = {v}" for k, v in worst.items()))


def run_fig5(config, threads=None):
    """Efficiency over a (T, lambda0) grid for each protocol."""
    spec = _spec(config)
    if len(spec.axes) != 2:
        raise ConfigError("fig5: expects two sweep axes")
    xs, ys, grids = sweep_2d(spec, threads)
    (ax, ay) = spec.axes
    xname, xf, xlabel = AXIS_COLUMNS[ax.name]
    yname, yf, ylabel = AXIS_COLUMNS[ay.name]
    X, Y = np.meshgrid(xs * xf, ys * yf, indexing="ij")
    columns = {xname: X.ravel(), yname: Y.ravel()}
    for name, grid in grids.items():
        columns[f"eps_{name}"] = grid.ravel()
    table = Table("fig5", columns, _comments("fig5", config, ["rows: first axis outer, second axis inner"]))
    panels = [
        HeatmapPanel(name, xs * xf, ys * yf, grid, xlabel, ylabel, "efficiency", name)
        for name, grid in grids.items()
    ]
    high = ", ".join(f"{k}: {int((g >= 0.99).sum())}" for k, g in grids.items())
    return ScenarioOutput([table], panels, f"fig5: {xs.size}x{ys.size} grid, points with efficiency >= 0.99 {high}")


FIG6_VARIANTS = (
    Variant("N0"),
    Variant("N1", n_pairs=1),
    Variant("N9", n_pairs=9),
    Variant("eff", Protocol.EFFECTIVE_3MODE),
)


def run_fig6(config, threads=None):
    """AP efficiency against T for 1, 3 and 19 fiber modes and the eliminated model."""
    _single_axis(config, "duration", "fig6")
    spec = _spec(config, (Protocol.AP,))
    result = sweep_variants(spec, FIG6_VARIANTS, threads)
    columns = {"T_ns": result["duration"] * 1e9}
    for v in FIG6_VARIANTS:
        columns[f"eps_{v.label}"] = result[v.label]
    table = Table("fig6", columns, _comments("fig6", config))
    labels = {"N0": "single mode", "N1": "3 modes", "N9": "19 modes", "eff": "eliminated f+-1"}
    styles = {"N0": "--", "N1": "-", "N9": "-.", "eff": ":"}
    series = [Series(labels[v.label], "T_ns", f"eps_{v.label}", styles[v.label]) for v in FIG6_VARIANTS]
    panel = LinePanel(table, series, "T (ns)", "efficiency", "multimode fiber")
    last = ", ".join(f"{k} = {_fmt(v[-1])}" for k, v in columns.items() if k != "T_ns")
    return ScenarioOutput([table], [panel], f"fig6: {table.n_rows} durations, at longest T {last}")


def _fiber_table(name, config, threads, extra=()):
    _single_axis(config, "fiber_length", "fig7")
    spec = _spec(config, (Protocol.AP,))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        result = sweep_fiber_length(spec, (1, 9), threads)
    columns = {
        "L_m": result["fiber_length"],
        "ineff_N1": result["N1"],
        "ineff_N9": result["N9"],
        "ineff_analytic": result["analytic"],
    }
    return Table(name, columns, _comments("fig7", config, extra))


def _fiber_panel(table, title):
    series = [
        Series("3 modes", "L_m", "ineff_N1", "o"),
        Series("19 modes", "L_m", "ineff_N9", "x"),
        Series("closed form", "L_m", "ineff_analytic", "-"),
    ]
    return LinePanel(table, series, "fiber length (m)", "1 - efficiency", title, "log", "log")


def run_fig7(config, threads=None):
    """Inefficiency against fiber length: simulation against the closed form.

    ``fig7.csv`` uses the pulse width the closed form assumes;
    ``fig7_sigma_t4.csv`` repeats the sweep with the caption width and
    ``fig7_inset.csv`` with the inset couplings and loss.
    """
    main = _fiber_table("fig7", config, threads)
    wide = _fiber_table(
        "fig7_sigma_t4", config.replace(sigma_ratio=FIG7_CAPTION_SIGMA_RATIO), threads,
        ["closed-form column assumes sigma = T/8 and is shown for reference"],
    )
    inset = _fiber_table("fig7_inset", config.replace(**FIG7_INSET), threads)
    panels = [
        _fiber_panel(main, f"sigma = {config.sigma_ratio:.4g} T"),
        _fiber_panel(wide, f"sigma = {FIG7_CAPTION_SIGMA_RATIO:.4g} T"),
        _fiber_panel(inset, "inset couplings"),
    ]
    c = main.columns
    k = int(np.argmin(np.abs(c["L_m"] - 100.0)))
    summary = (
        f"fig7: {main.n_rows} lengths; at L = {_fmt(c['L_m'][k])} m ineff N1 = {_fmt(c['ineff_N1'][k])}, "
        f"N9 = {_fmt(c['ineff_N9'][k])}, closed form = {_fmt(c['ineff_analytic'][k])}"
    )
    return ScenarioOutput([main, wide, inset], panels, summary)


def run_custom(config, threads=None):
    """Single transfer, or a 1-D / 2-D sweep when sweep keys are present."""
    require_fiber(config)
    axes = config.axes()
    if not axes:
        return _custom_single(config)
    spec = _spec(config)
    if len(axes) == 1:
        (ax,) = axes
        xname, xf, xlabel = AXIS_COLUMNS[ax.name]
        result = sweep_1d(spec, threads)
        columns = {xname: result[ax.name] * xf}
        for protocol in spec.protocols:
            columns[f"eps_{protocol.value}"] = result[protocol.value]
        table = Table("custom", columns, _comments("custom", config))
        series = [Series(k[4:], xname, k) for k in columns if k != xname]
        panel = LinePanel(table, series, xlabel, "efficiency", "custom sweep", ax.scale)
        return ScenarioOutput([table], [panel], f"custom: {table.n_rows} points x {len(series)} protocols")
    xs, ys, grids = sweep_2d(spec, threads)
    (ax, ay) = axes
    xname, xf, xlabel = AXIS_COLUMNS[ax.name]
    yname, yf, ylabel = AXIS_COLUMNS[ay.name]
    X, Y = np.meshgrid(xs * xf, ys * yf, indexing="ij")
    columns = {xname: X.ravel(), yname: Y.ravel()}
    for name, grid in grids.items():
        columns[f"eps_{name}"] = grid.ravel()
    table = Table("custom", columns, _comments("custom", config, ["rows: first axis outer, second axis inner"]))
    panels = [HeatmapPanel(n, xs * xf, ys * yf, g, xlabel, ylabel, "efficiency", n) for n, g in grids.items()]
    return ScenarioOutput([table], panels, f"custom: {xs.size}x{ys.size} grid x {len(grids)} protocols")


def _custom_single(config):
    p, c = config.pulse(), config.system()
    with warnings.catch_warnings():
        warnings.simplefilter("always", ValidityWarning)
        with warnings.catch_warnings(record=True) as caught:
            r = transfer_efficiency(p, c, _settings(config))
    notes = [f"warning = {w.message}" for w in caught if issubclass(w.category, ValidityWarning)]
    table = Table(
        "custom",
        {
            "epsilon": [r.epsilon],
            "residual_m1": [r.residual_mechanical_population],
            "residual_fiber": [r.residual_fiber_population],
            "dissipated": [r.dissipated],
            "steps": [r.steps],
        },
        _comments("custom", config, notes),
    )
    traj = {"t_ns": r.trajectory.times * 1e9}
    for k, label in enumerate(r.labels):
        traj[f"pop_{_column_label(label)}"] = r.trajectory.populations[:, k]
    trajectory = Table("custom_trajectory", traj, _comments("custom", config))
    keep = [k for k in traj if k != "t_ns" and (k in ("pop_m1", "pop_m2", "pop_f0") or len(r.labels) <= 5)]
    panel = LinePanel(trajectory, [Series(k[4:], "t_ns", k) for k in keep], "t (ns)", "population",
                      f"{config.protocol.value}, {c.dim} modes")
    summary = f"custom: epsilon = {r.epsilon:.9f} ({config.protocol.value}, {c.dim} modes, {r.steps} steps)"
    return ScenarioOutput([table, trajectory], [panel], summary)


def _column_label(label):
    return label.replace("+", "p").replace("-", "m")


RUNNERS = {
    "fig2": run_fig2,
    "fig3": run_fig3,
    "fig4": run_fig4,
    "fig5": run_fig5,
    "fig6": run_fig6,
    "fig7": run_fig7,
    "custom": run_custom,
}


def run_scenario(name, config=None, threads=None):
    if name not in RUNNERS:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {', '.join(SCENARIOS)}")
    return RUNNERS[name](config if config is not None else DEFAULTS[name], threads)
