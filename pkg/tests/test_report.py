import json
import os

import numpy as np
import pytest

from qst_sim.report import HeatmapPanel, LinePanel, Series, Table, csv_text, emit_plot_data, render_plot, write_csv


def _table(name="demo", n=5):
    x = np.linspace(10, 1000, n)
    return Table(name, {"L_m": x, "ineff_N1": 1e-5 * x, "ineff_N9": 1.1e-5 * x}, ["scenario = demo", "a = 1"])


def test_csv_layout():
    text = csv_text(_table(n=2))
    lines = text.splitlines()
    assert lines[:2] == ["# scenario = demo", "# a = 1"]
    assert lines[2] == "L_m,ineff_N1,ineff_N9"
    assert lines[3] == "10,0.0001,0.00011"
    assert text.endswith("\n")


def test_csv_uses_twelve_significant_digits():
    text = csv_text(Table("t", {"x": [np.pi]}))
    assert text.splitlines()[-1] == "3.14159265359"


def test_csv_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    write_csv(_table(), a)
    write_csv(_table(), b)
    assert (a / "demo.csv").read_bytes() == (b / "demo.csv").read_bytes()


def test_table_validation():
    with pytest.raises(ValueError, match="different lengths"):
        Table("t", {"a": [1, 2], "b": [1]})
    with pytest.raises(ValueError, match="empty"):
        csv_text(Table("t", {"a": []}))


def test_line_plot_description(tmp_path):
    table = _table()
    panel = LinePanel(table, [Series("N=1", "L_m", "ineff_N1"), Series("N=9", "L_m", "ineff_N9", "--")],
                      "fiber length (m)", "1 - eps", xscale="log", yscale="log")
    written = emit_plot_data("demo", [panel], tmp_path)
    assert sorted(os.path.basename(p) for p in written) == ["demo.plot", "demo_ineff_N1.dat", "demo_ineff_N9.dat"]
    desc = json.loads((tmp_path / "demo.plot").read_text())
    (p,) = desc["panels"]
    assert p["kind"] == "line" and p["x"]["scale"] == "log" and p["y"]["scale"] == "log"
    assert p["x"]["label"] == "fiber length (m)"
    data = np.loadtxt(tmp_path / "demo_ineff_N9.dat")
    np.testing.assert_allclose(data[:, 1], table.columns["ineff_N9"], rtol=1e-11)


def test_heatmap_files(tmp_path):
    x, y = np.array([1.0, 2.0, 3.0]), np.array([10.0, 20.0])
    grid = np.arange(6.0).reshape(3, 2) / 6
    emit_plot_data("g", [HeatmapPanel("AP", x, y, grid, "T", "lambda0", "eps")], tmp_path)
    np.testing.assert_allclose(np.loadtxt(tmp_path / "g_AP.matrix"), grid)
    desc = json.loads((tmp_path / "g.plot").read_text())
    assert desc["panels"][0]["kind"] == "heatmap"
    assert desc["panels"][0]["matrix"] == "g_AP.matrix"


def test_empty_table_writes_nothing(tmp_path):
    good = LinePanel(_table(), [Series("a", "L_m", "ineff_N1")], "x", "y")
    empty = LinePanel(Table("e", {"L_m": [], "y": []}), [Series("b", "L_m", "y")], "x", "y")
    with pytest.raises(ValueError, match="empty"):
        emit_plot_data("demo", [good, empty], tmp_path)
    assert list(tmp_path.iterdir()) == []


def test_heatmap_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        emit_plot_data("g", [HeatmapPanel("h", [1, 2], [1], np.zeros((1, 2)), "x", "y", "z")], ".")


def test_io_error_names_path(tmp_path):
    missing = tmp_path / "no" / "such"
    with pytest.raises(OSError, match="no/such"):
        write_csv(_table(), missing)


def test_render_png(tmp_path):
    pytest.importorskip("matplotlib")
    panel = LinePanel(_table(), [Series("a", "L_m", "ineff_N1")], "x", "y", xscale="log")
    heat = HeatmapPanel("h", [1.0, 2.0], [3.0, 4.0], np.eye(2), "x", "y", "z")
    emit_plot_data("demo", [panel, heat], tmp_path)
    png = render_plot(str(tmp_path / "demo.plot"))
    assert open(png, "rb").read(8) == b"\x89PNG\r\n\x1a\n"
