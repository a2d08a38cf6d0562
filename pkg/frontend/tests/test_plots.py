"""Renderer tests against artifacts produced by the upstream command line.

The upstream package is exercised strictly through `python -m ftl_lwr`; the
only coupling is the documented CSV schemas.
"""

import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from ftl_lwr_plots.cli import main
from ftl_lwr_plots.io import DENSITY_COLUMNS, GRID_COLUMNS, InputError, read_table
from ftl_lwr_plots.render import (
    PlotSpec,
    build_density_figure,
    build_grid_figure,
    render_density,
    render_grid,
)


def simulate(preset: str, out_dir) -> None:
    proc = subprocess.run(
        [sys.executable, "-m", "ftl_lwr", "simulate", "--preset", preset,
         "--out", str(out_dir)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr


@pytest.fixture(scope="session")
def figure12_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("figure12")
    simulate("figure12", d)
    return d


@pytest.fixture(scope="session")
def constant_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("constant")
    simulate("constant", d)
    return d


def checksums(directory):
    return {
        p.name: hashlib.sha256(p.read_bytes()).hexdigest()
        for p in sorted(directory.iterdir())
    }


def png_dimensions(path):
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    return (
        int.from_bytes(data[16:20], "big"),
        int.from_bytes(data[20:24], "big"),
    )


def gid_count(fig, prefix):
    return sum(
        1
        for ax in fig.axes
        for artist in list(ax.lines) + list(ax.patches)
        if (artist.get_gid() or "").startswith(prefix)
    )


# ------------------------------------------------------------- acceptance


def test_criterion_10_figure12_images(figure12_dir, tmp_path):
    """Both renderers consume the cosine-bump artifacts and the counts match
    the run: 20 vehicle paths, 41 time levels, density curves at t=0 and 2."""
    before = checksums(figure12_dir)

    grid_png = tmp_path / "grid.png"
    density_png = tmp_path / "density.png"
    assert main(["--kind", "grid", "--in", str(figure12_dir), "--out", str(grid_png)]) == 0
    assert main(["--kind", "density", "--in", str(figure12_dir), "--out", str(density_png)]) == 0
    assert grid_png.stat().st_size > 0 and density_png.stat().st_size > 0

    fig = build_grid_figure(read_table(figure12_dir / "grid.csv", GRID_COLUMNS))
    assert gid_count(fig, "trajectory-") == 20
    assert gid_count(fig, "time-level-") == 41
    assert gid_count(fig, "mass-line-") == 20
    assert gid_count(fig, "mass-level-") == 41

    dfig = build_density_figure(read_table(figure12_dir / "density.csv", DENSITY_COLUMNS))
    labels = sorted(
        artist.get_label()
        for ax in dfig.axes
        for artist in ax.patches
        if (artist.get_gid() or "").startswith("density-")
    )
    assert labels == ["t = 0", "t = 2"]

    assert checksums(figure12_dir) == before  # rendering never touches inputs
    print(
        "\n[PASS] criterion 10: grid and density images render from the "
        "cosine-bump artifacts; 20 vehicle paths, 41 time levels, curves at "
        "t=0 and t=2; inputs untouched"
    )


# ------------------------------------------------------------------ rendering


def test_grid_image_dimensions_are_deterministic(figure12_dir, tmp_path):
    p1 = tmp_path / "a.png"
    p2 = tmp_path / "b.png"
    render_grid(PlotSpec(str(figure12_dir), str(p1), "grid"))
    render_grid(PlotSpec(str(figure12_dir), str(p2), "grid"))
    assert png_dimensions(p1) == png_dimensions(p2) == (1400, 630)


def test_constant_preset_paths_are_parallel(constant_dir, tmp_path):
    out = tmp_path / "c.png"
    render_grid(PlotSpec(str(constant_dir), str(out), "grid"))
    fig = build_grid_figure(read_table(constant_dir / "grid.csv", GRID_COLUMNS))
    slopes = []
    for ax in fig.axes:
        for line in ax.lines:
            if (line.get_gid() or "").startswith("trajectory-"):
                z, t = line.get_xdata(), line.get_ydata()
                slopes.append((z[-1] - z[0]) / (t[-1] - t[0]))
    assert len(slopes) == 10
    assert np.ptp(slopes) <= 1e-9  # uniform translation: equal speeds


def test_constant_preset_density_is_flat(constant_dir):
    table = read_table(constant_dir / "density.csv", DENSITY_COLUMNS)
    assert np.allclose(table["rho"], 0.5, atol=1e-9)
    fig = build_density_figure(table)
    curves = [
        a for ax in fig.axes for a in ax.patches
        if (a.get_gid() or "").startswith("density-")
    ]
    assert len(curves) == 2


def test_density_single_time_selection(figure12_dir):
    table = read_table(figure12_dir / "density.csv", DENSITY_COLUMNS)
    fig = build_density_figure(table, times=(2.0,))
    curves = [
        a for ax in fig.axes for a in ax.patches
        if (a.get_gid() or "").startswith("density-")
    ]
    assert len(curves) == 1
    assert curves[0].get_label() == "t = 2"


def test_density_values_match_file(figure12_dir):
    # the drawn steps are exactly the file's rho column, no resampling
    table = read_table(figure12_dir / "density.csv", DENSITY_COLUMNS)
    fig = build_density_figure(table, times=(0.0,))
    (curve,) = [
        a for ax in fig.axes for a in ax.patches
        if (a.get_gid() or "").startswith("density-")
    ]
    sel = table["t"] == 0.0
    order = np.argsort(table["z_left"][sel], kind="stable")
    assert np.array_equal(curve.get_data().values, table["rho"][sel][order])


# --------------------------------------------------------------- error paths


def test_missing_file_is_input_error(tmp_path, capsys):
    assert main(["--kind", "grid", "--in", str(tmp_path), "--out",
                 str(tmp_path / "x.png")]) == 2
    assert "not found" in capsys.readouterr().err


def test_header_only_csv_is_input_error(tmp_path, capsys):
    (tmp_path / "density.csv").write_text("t,z_left,z_right,rho\n")
    assert main(["--kind", "density", "--in", str(tmp_path), "--out",
                 str(tmp_path / "x.png")]) == 2
    assert "no data rows" in capsys.readouterr().err


def test_wrong_header_is_input_error(tmp_path, capsys):
    (tmp_path / "grid.csv").write_text("a,b,c\n1,2,3\n")
    assert main(["--kind", "grid", "--in", str(tmp_path), "--out",
                 str(tmp_path / "x.png")]) == 2
    assert "schema" in capsys.readouterr().err


def test_absent_time_is_input_error(figure12_dir, tmp_path, capsys):
    rc = main(["--kind", "density", "--in", str(figure12_dir), "--out",
               str(tmp_path / "x.png"), "--times", "0,7"])
    assert rc == 2
    assert "not present" in capsys.readouterr().err


def test_times_flag_rejected_for_grid(figure12_dir, tmp_path, capsys):
    rc = main(["--kind", "grid", "--in", str(figure12_dir), "--out",
               str(tmp_path / "x.png"), "--times", "0"])
    assert rc == 2


def test_malformed_times_is_input_error(figure12_dir, tmp_path, capsys):
    rc = main(["--kind", "density", "--in", str(figure12_dir), "--out",
               str(tmp_path / "x.png"), "--times", "0,two"])
    assert rc == 2


def test_non_numeric_cell_is_input_error(tmp_path):
    (tmp_path / "density.csv").write_text("t,z_left,z_right,rho\n0.0,a,1.0,0.5\n")
    with pytest.raises(InputError, match="non-numeric"):
        read_table(tmp_path / "density.csv", DENSITY_COLUMNS)


def test_invariants_side_file_ignored(figure12_dir):
    # presence of the sibling JSON artifacts must not confuse the readers
    assert json.loads((figure12_dir / "invariants.json").read_text())["violations"] == []
