"""Figure rendering from synthetic training-log CSVs (no primary imports)."""

from pathlib import Path

import pytest

from sensplot import FigureSpec, SchemaError, read_series, render_sensitivity_figure
from sensplot.cli import main

HEADER = "epoch,loss,val_auc,sens_avg,sens_min,sens_max"


def make_csv(path: Path, rows):
    path.write_text(HEADER + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


GOOD_A = [
    "1,0.9,0.5,,,",
    "2,0.8,0.55,0.01,0.002,0.03",
    "3,0.75,0.6,,,",
    "4,0.7,0.62,0.012,0.003,0.035",
]
GOOD_B = [
    "1,0.95,0.5,,,",
    "2,0.85,0.52,0.008,0.001,0.02",
    "4,0.72,0.6,0.009,0.002,0.022",
]


class TestReadSeries:
    def test_skips_unlogged_epochs(self, tmp_path):
        s = read_series(make_csv(tmp_path / "a.csv", GOOD_A), "a")
        assert s.epochs.tolist() == [2, 4]
        assert s.avg.tolist() == [0.01, 0.012]

    def test_wrong_header_names_columns(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("epoch,wrong,columns\n1,2,3\n")
        with pytest.raises(SchemaError, match="columns"):
            read_series(p, "x")

    def test_empty_file_rejected(self, tmp_path):
        p = tmp_path / "empty.csv"
        p.write_text("")
        with pytest.raises(SchemaError, match="empty"):
            read_series(p, "x")

    def test_header_only_rejected(self, tmp_path):
        p = make_csv(tmp_path / "h.csv", [])
        with pytest.raises(SchemaError, match="no epochs"):
            read_series(p, "x")

    def test_non_numeric_rejected(self, tmp_path):
        p = make_csv(tmp_path / "n.csv", ["1,0.5,0.5,a,b,c"])
        with pytest.raises(SchemaError, match="non-numeric"):
            read_series(p, "x")


class TestRender:
    def test_two_variant_overlay(self, tmp_path):
        a = make_csv(tmp_path / "a.csv", GOOD_A)
        b = make_csv(tmp_path / "b.csv", GOOD_B)
        out = tmp_path / "fig.png"
        fig = render_sensitivity_figure(
            FigureSpec([a, b], ["hyperbolic", "euclidean"], 0.0, out)
        )
        assert out.exists() and out.stat().st_size > 1000
        labels = [t.get_text() for t in fig.axes[0].get_legend().get_texts()]
        assert labels == ["hyperbolic", "euclidean"]
        assert "delta = 0" in fig.axes[0].get_title()

    def test_single_epoch_degenerate_band(self, tmp_path):
        a = make_csv(tmp_path / "one.csv", ["1,0.9,0.5,0.01,0.005,0.02"])
        out = tmp_path / "one.png"
        render_sensitivity_figure(FigureSpec([a], ["only"], 1.5, out))
        assert out.exists()

    def test_mismatched_epoch_grids_rejected(self, tmp_path):
        a = make_csv(tmp_path / "a.csv", GOOD_A)
        c = make_csv(tmp_path / "c.csv", ["2,0.8,0.5,0.01,0.0,0.02"])
        with pytest.raises(SchemaError, match="grids differ"):
            render_sensitivity_figure(FigureSpec([a, c], ["a", "c"], 0.0, tmp_path / "x.png"))

    def test_label_count_mismatch_rejected(self, tmp_path):
        a = make_csv(tmp_path / "a.csv", GOOD_A)
        with pytest.raises(SchemaError, match="labels"):
            FigureSpec([a], ["one", "two"], 0.0, tmp_path / "x.png")

    def test_rerender_byte_stable(self, tmp_path):
        a = make_csv(tmp_path / "a.csv", GOOD_A)
        p1, p2 = tmp_path / "r1.png", tmp_path / "r2.png"
        render_sensitivity_figure(FigureSpec([a], ["a"], 0.0, p1, log_y=True))
        render_sensitivity_figure(FigureSpec([a], ["a"], 0.0, p2, log_y=True))
        assert p1.read_bytes() == p2.read_bytes()


class TestCli:
    def test_ok(self, tmp_path, capsys):
        a = make_csv(tmp_path / "a.csv", GOOD_A)
        out = tmp_path / "f.png"
        code = main(["--csv", str(a), "--label", "a", "--delta", "0.5", "--out", str(out)])
        assert code == 0 and out.exists()

    def test_schema_violation_exit_nonzero(self, tmp_path, capsys):
        p = tmp_path / "bad.csv"
        p.write_text("epoch,foo\n1,2\n")
        code = main(["--csv", str(p), "--label", "x", "--delta", "0", "--out",
                     str(tmp_path / "no.png")])
        assert code != 0
        assert "column" in capsys.readouterr().err

    def test_missing_flags_exit_2(self):
        assert main(["--csv", "x.csv"]) == 2
