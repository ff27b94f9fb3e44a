"""Figure tests, including the acceptance check: all three kinds render
from real experiment CSVs without error, and re-rendering reproduces the
output bytes exactly.

The CSVs come from the primary package's command line, which is the only
interface this package consumes.
"""

import subprocess
import sys
from pathlib import Path

import pandas as pd
import pytest

from epifam_plots.cli import main
from epifam_plots.figures import FigureSpec, MissingColumnsError, bias_points, render

EXPERIMENT_CFG = """\
risk_setting = 1,6
vaf = 0.1,0.3
population = hwe
prevalence = 0.05
n_case_families = 60
n_control_families = 60
missing_father_prob = 0.5
methods = lime-mix,lime-pair,ll-lrt,cll
replicates = 3
seed = 77
"""

SENSITIVITY_CFG = """\
risk_setting = 2
vaf = 0.1,0.3
population = hwe
prevalence = 0.05
n_case_families = 60
n_control_families = 60
missing_father_prob = 0.5
replicates = 3
seed = 78
multipliers = 0.8,1.2
"""


def _run_epifam(*argv) -> None:
    subprocess.run([sys.executable, "-m", "epifam.cli", *argv], check=True, capture_output=True)


@pytest.fixture(scope="module")
def experiment_csvs(tmp_path_factory):
    root = tmp_path_factory.mktemp("csvs")
    cfg = root / "experiment.cfg"
    cfg.write_text(EXPERIMENT_CFG)
    _run_epifam("experiment", "--config", str(cfg), "--out", str(root / "exp"), "--workers", "2")
    sens_cfg = root / "sensitivity.cfg"
    sens_cfg.write_text(SENSITIVITY_CFG)
    _run_epifam("sensitivity", "--config", str(sens_cfg), "--out", str(root / "sens"))
    return {
        "metrics": root / "exp" / "metrics.csv",
        "records": root / "exp" / "records.csv",
        "sensitivity": root / "sens" / "sensitivity_records.csv",
    }


def _specs(csvs, outdir):
    return [
        FigureSpec("bias-scatter", (str(csvs["records"]),), str(outdir / "bias"),
                   x_method="cll", y_method="lime-pair"),
        FigureSpec("power-grid", (str(csvs["metrics"]),), str(outdir / "power")),
        FigureSpec("sensitivity-scatter", (str(csvs["sensitivity"]),), str(outdir / "sens")),
    ]


def test_all_kinds_render_and_rerender_identically(experiment_csvs, tmp_path):
    """[ACCEPTANCE] figure generation from experiment CSVs, byte-stable."""
    for spec in _specs(experiment_csvs, tmp_path / "a"):
        png, svg = render(spec)
        assert Path(png).stat().st_size > 0
        assert Path(svg).stat().st_size > 0
        first = (Path(png).read_bytes(), Path(svg).read_bytes())
        png2, svg2 = render(spec)
        assert (Path(png2).read_bytes(), Path(svg2).read_bytes()) == first, spec.kind
        print(f"\n[ACCEPTANCE] figure {spec.kind}: PASS (rendered twice, byte-identical)")


def test_bias_scatter_self_comparison_sits_on_diagonal(experiment_csvs):
    df = pd.read_csv(experiment_csvs["records"])
    points = bias_points(df, "lime-mix", "lime-mix", ("r1", "r2", "s1", "s2"))
    assert not points.empty
    assert (points["x"] == points["y"]).all()


def test_power_grid_reads_rates_not_records(experiment_csvs, tmp_path):
    spec = FigureSpec("power-grid", (str(experiment_csvs["records"]),), str(tmp_path / "x"))
    with pytest.raises(MissingColumnsError, match="reject_association"):
        render(spec)


def test_empty_csv_yields_warning_panel(experiment_csvs, tmp_path):
    header = Path(experiment_csvs["records"]).read_text().splitlines()[0]
    empty = tmp_path / "empty.csv"
    empty.write_text(header + "\n")
    spec = FigureSpec("bias-scatter", (str(empty),), str(tmp_path / "empty_fig"))
    png, svg = render(spec)
    assert "warning" in Path(svg).read_text()


def test_cli_roundtrip(experiment_csvs, tmp_path, capsys):
    out = tmp_path / "cli_fig"
    code = main(
        ["--kind", "power-grid", "--input", str(experiment_csvs["metrics"]), "--out", str(out)]
    )
    assert code == 0
    assert out.with_suffix(".png").exists() and out.with_suffix(".svg").exists()


def test_cli_reports_missing_columns(experiment_csvs, tmp_path, capsys):
    code = main(
        ["--kind", "power-grid", "--input", str(experiment_csvs["sensitivity"]),
         "--out", str(tmp_path / "bad")]
    )
    assert code == 2
    assert "missing columns" in capsys.readouterr().err


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValueError):
        FigureSpec("pie", ("x.csv",), str(tmp_path / "p"))
