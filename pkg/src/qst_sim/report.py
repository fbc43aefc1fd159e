"""
Tabular and plot-data output.

CSV files start with ``#`` comment lines carrying the resolved configuration,
then a snake_case header, then rows with 12 significant digits.  Identical
inputs give byte-identical files.

Plot data is declarative: one whitespace-delimited ``.dat`` file per series
(or a ``.matrix`` file per heatmap) plus a JSON ``.plot`` description naming
axes, scales and labels.  :func:`render_plot` turns such a description into a
PNG with matplotlib; nothing else in the package needs matplotlib.
"""

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"


@dataclass
class Table:
    """Named columns of equal length plus provenance comments."""

    name: str
    columns: dict
    comments: list = field(default_factory=list)

    def __post_init__(self):
        self.columns = {k: np.asarray(v, dtype=float) for k, v in self.columns.items()}
        lengths = {v.shape for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"table {self.name!r} has columns of different lengths: {sorted(lengths)}")
        if any(len(s) != 1 for s in lengths):
            raise ValueError(f"table {self.name!r} columns must be one-dimensional")

    @property
    def n_rows(self):
        return next(iter(self.columns.values())).size if self.columns else 0

    @property
    def is_empty(self):
        return not self.columns or self.n_rows == 0


@dataclass
class Series:
    label: str
    x: str
    y: str
    style: str = "-"


@dataclass
class LinePanel:
    table: Table
    series: list
    xlabel: str
    ylabel: str
    title: str = ""
    xscale: str = "linear"
    yscale: str = "linear"


@dataclass
class HeatmapPanel:
    """``grid[i, j]`` is the value at ``x[i]``, ``y[j]``."""

    name: str
    x: np.ndarray
    y: np.ndarray
    grid: np.ndarray
    xlabel: str
    ylabel: str
    zlabel: str
    title: str = ""


def csv_text(table):
    if table.is_empty:
        raise ValueError(f"table {table.name!r} is empty")
    lines = [f"# {c}" for c in table.comments]
    lines.append(",".join(table.columns))
    data = np.column_stack(list(table.columns.values()))
    lines.extend(",".join(FLOAT_FORMAT % v for v in row) for row in data)
    return "\n".join(lines) + "\n"


def _write_all(files):
    """Write ``{path: text}``; on failure remove what was written and re-raise with the path."""
    written = []
    try:
        for path, text in files.items():
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
            written.append(path)
    except OSError as exc:
        for path in written:
            try:
                os.remove(path)
            except OSError:
                pass
        raise OSError(exc.errno, f"cannot write {exc.filename or path}: {exc.strerror}") from exc
    return list(files)


def write_csv(table, out_dir):
    path = os.path.join(out_dir, f"{table.name}.csv")
    return _write_all({path: csv_text(table)})[0]


def _dat_text(columns, header):
    lines = ["# " + " ".join(header)]
    lines.extend(" ".join(FLOAT_FORMAT % v for v in row) for row in np.column_stack(columns))
    return "\n".join(lines) + "\n"


def _matrix_text(grid):
    return "\n".join(" ".join(FLOAT_FORMAT % v for v in row) for row in np.asarray(grid, float)) + "\n"


def plot_files(stem, panels):
    """In-memory contents of every plot-data file for ``panels``.

    Returns ``(files, description)`` with ``files`` mapping relative file
    names to text.  Raises ValueError for an empty table or grid.
    """
    if not panels:
        raise ValueError(f"nothing to plot for {stem!r}")
    files = {}
    described = []
    for panel in panels:
        if isinstance(panel, HeatmapPanel):
            grid = np.asarray(panel.grid, float)
            if grid.size == 0:
                raise ValueError(f"heatmap {panel.name!r} is empty")
            if grid.shape != (np.size(panel.x), np.size(panel.y)):
                raise ValueError(f"heatmap {panel.name!r} grid shape {grid.shape} does not match its axes")
            base = f"{stem}_{panel.name}"
            files[f"{base}.matrix"] = _matrix_text(grid)
            files[f"{base}_x.dat"] = _dat_text([panel.x], ["x"])
            files[f"{base}_y.dat"] = _dat_text([panel.y], ["y"])
            described.append({
                "kind": "heatmap",
                "title": panel.title,
                "matrix": f"{base}.matrix",
                "x": {"file": f"{base}_x.dat", "label": panel.xlabel},
                "y": {"file": f"{base}_y.dat", "label": panel.ylabel},
                "z": {"label": panel.zlabel, "layout": "rows follow x, columns follow y"},
            })
            continue
        table = panel.table
        if table.is_empty:
            raise ValueError(f"table {table.name!r} is empty")
        series = []
        for s in panel.series:
            fname = f"{table.name}_{s.y}.dat"
            files[fname] = _dat_text([table.columns[s.x], table.columns[s.y]], [s.x, s.y])
            series.append({"label": s.label, "file": fname, "columns": [s.x, s.y], "style": s.style})
        described.append({
            "kind": "line",
            "title": panel.title,
            "x": {"label": panel.xlabel, "scale": panel.xscale},
            "y": {"label": panel.ylabel, "scale": panel.yscale},
            "series": series,
        })
    description = {"format": "qst-sim plot 1", "name": stem, "panels": described}
    return files, description


def emit_plot_data(stem, panels, out_dir):
    """Write the data files and ``<stem>.plot``; returns the written paths.

    Nothing is written when any panel is empty.
    """
    files, description = plot_files(stem, panels)
    files[f"{stem}.plot"] = json.dumps(description, indent=2, sort_keys=True) + "\n"
    return _write_all({os.path.join(out_dir, k): v for k, v in files.items()})


def render_plot(plot_path, png_path=None):
    """Render a ``.plot`` description to PNG with matplotlib (Agg backend)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(plot_path, encoding="utf-8") as fh:
        description = json.load(fh)
    base = os.path.dirname(plot_path)
    panels = description["panels"]
    fig, axes = plt.subplots(len(panels), 1, figsize=(6.0, 3.6 * len(panels)), squeeze=False)
    for ax, panel in zip(axes[:, 0], panels):
        if panel["kind"] == "heatmap":
            grid = np.loadtxt(os.path.join(base, panel["matrix"]), ndmin=2)
            x = np.loadtxt(os.path.join(base, panel["x"]["file"]), ndmin=1)
            y = np.loadtxt(os.path.join(base, panel["y"]["file"]), ndmin=1)
            mesh = ax.pcolormesh(x, y, grid.T, shading="nearest", vmin=0.0, vmax=1.0, cmap="viridis")
            fig.colorbar(mesh, ax=ax, label=panel["z"]["label"])
        else:
            for s in panel["series"]:
                data = np.loadtxt(os.path.join(base, s["file"]), ndmin=2)
                ax.plot(data[:, 0], data[:, 1], s.get("style", "-"), label=s["label"])
            ax.set_xscale(panel["x"]["scale"])
            ax.set_yscale(panel["y"]["scale"])
            ax.legend(frameon=False, fontsize="small")
        ax.set_xlabel(panel["x"]["label"])
        ax.set_ylabel(panel["y"]["label"])
        if panel.get("title"):
            ax.set_title(panel["title"], fontsize="medium")
    fig.tight_layout()
    png_path = png_path or os.path.splitext(plot_path)[0] + ".png"
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return png_path


def try_render(plot_path):
    """Render when matplotlib is installed; return the PNG path or None."""
    try:
        import matplotlib  # noqa: F401
    except ImportError:
        log.info("matplotlib not installed; skipping %s", plot_path)
        return None
    return render_plot(plot_path)
