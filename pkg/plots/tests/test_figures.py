import numpy as np
import pytest
from matplotlib.image import imread

from utmc_plots import cli
from utmc_plots.figures import FigureSpec, render
from utmc_plots.io import SchemaError


def test_curves_panel(curves_csv, tmp_path):
    out = tmp_path / "curves.png"
    render(FigureSpec(kind="curves", inputs=[str(curves_csv)], out=str(out)))
    assert out.exists() and out.stat().st_size > 1000


def test_curves_level_selection(curves_csv, tmp_path):
    out = tmp_path / "one.png"
    render(FigureSpec(kind="curves", inputs=[str(curves_csv)], out=str(out), levels=[1]))
    assert out.exists()


def test_curves_empty_selection_writes_nothing(curves_csv, tmp_path):
    out = tmp_path / "nothing.png"
    with pytest.raises(SchemaError, match="empty level selection"):
        render(FigureSpec(kind="curves", inputs=[str(curves_csv)], out=str(out), levels=[]))
    assert not out.exists()


def test_curves_missing_level_errors(curves_csv, tmp_path):
    out = tmp_path / "nothing.png"
    with pytest.raises(SchemaError, match="not present"):
        render(FigureSpec(kind="curves", inputs=[str(curves_csv)], out=str(out), levels=[7]))
    assert not out.exists()


def test_tau_vs_f_panel(summary_csv, thresholds_json, tmp_path):
    out = tmp_path / "tau.png"
    render(
        FigureSpec(
            kind="tau_vs_f",
            inputs=[str(summary_csv)],
            out=str(out),
            thresholds=str(thresholds_json),
        )
    )
    assert out.exists() and out.stat().st_size > 1000


def test_heatmap_panel(summary_csv, thresholds_json, tmp_path):
    out = tmp_path / "map.png"
    render(
        FigureSpec(
            kind="heatmap",
            inputs=[str(summary_csv)],
            out=str(out),
            thresholds=str(thresholds_json),
        )
    )
    assert out.exists() and out.stat().st_size > 1000


def test_layer_panels(curves_csv, tmp_path):
    out = tmp_path / "panels.svg"
    render(FigureSpec(kind="layer_panels", inputs=[str(curves_csv), str(curves_csv)], out=str(out)))
    assert out.exists() and out.read_text().startswith("<?xml")


def test_rendering_is_deterministic(curves_csv, tmp_path):
    a, b = tmp_path / "a.png", tmp_path / "b.png"
    spec = dict(kind="curves", inputs=[str(curves_csv)])
    render(FigureSpec(**spec, out=str(a)))
    render(FigureSpec(**spec, out=str(b)))
    assert np.array_equal(imread(a), imread(b))


def test_unknown_kind_rejected(curves_csv, tmp_path):
    with pytest.raises(SchemaError, match="unknown figure kind"):
        FigureSpec(kind="pie", inputs=[str(curves_csv)], out=str(tmp_path / "x.png"))


def test_cli_roundtrip(curves_csv, tmp_path, capsys):
    out = tmp_path / "cli.png"
    rc = cli.main(["curves", "--in", str(curves_csv), "--out", str(out)])
    assert rc == 0 and out.exists()
    assert "wrote" in capsys.readouterr().out


def test_cli_schema_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("level,n\n0,0\n")
    rc = cli.main(["curves", "--in", str(bad), "--out", str(tmp_path / "x.png")])
    assert rc == 2
    assert "missing column" in capsys.readouterr().err
    assert not (tmp_path / "x.png").exists()
