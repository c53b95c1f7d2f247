import csv
import subprocess
import sys

import numpy as np
import pytest

from vctrl.cli import main
from vctrl.scenarios import SUMMARY_COLUMNS, fmt


def read_csv(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def summary(path):
    header, rows = read_csv(path / "summary.csv")
    return [dict(zip(header, r)) for r in rows]


def assert_conserved(path):
    header, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    s = data[:, header.index("s_h")] + data[:, header.index("i_h")] + data[:, header.index("r_h")]
    assert np.max(np.abs(s - 1.0)) <= 1e-9


def test_fmt_uses_ten_significant_digits():
    assert fmt(1 / 3) == "0.3333333333"
    assert fmt(2.0) == "2"
    assert fmt(1e-12 / 3) == "3.333333333e-13"
    assert fmt(True) == "true"
    assert fmt(None) == ""


def test_simulate_writes_trajectory_controls_summary(tmp_path):
    assert main(["simulate", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "trajectory.csv")
    assert header == ["t", "s_h", "i_h", "r_h", "a_m", "s_m", "i_m"]
    assert len(rows) == 337
    assert float(rows[-1][0]) == 84.0
    for row in rows:
        for cell in row:
            mantissa = cell.split("e")[0].replace("-", "").replace(".", "").lstrip("0")
            assert len(mantissa) <= 10
    assert_conserved(tmp_path / "trajectory.csv")

    header, rows = read_csv(tmp_path / "controls.csv")
    assert header == ["t", "c_A", "c_m", "alpha"]
    assert len(rows) == 85
    assert rows[0][1:] == ["0", "0", "1"]

    (row,) = summary(tmp_path)
    assert tuple(row) == SUMMARY_COLUMNS
    assert float(row["r0_initial"]) == pytest.approx(2.4564, abs=5e-4)


def test_r0_point(tmp_path):
    assert main(["r0", "--out", str(tmp_path)]) == 0
    (row,) = summary(tmp_path)
    assert float(row["r0_initial"]) == pytest.approx(2.4564, abs=5e-4)


def test_r0_sweep(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("r0.resolution = 11\n")
    assert main(["r0", "--pair", "c_m,c_A", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "r0_grid.csv").read_text().splitlines()
    assert lines[0] == "# x_name=c_m,y_name=c_A,fixed_name=alpha,fixed_value=1"
    assert lines[1] == "x,y,r0"
    assert len(lines) == 2 + 11 * 11
    assert (tmp_path / "r0_threshold.csv").exists()


def test_compare_improves_on_baseline(tmp_path):
    assert main(["compare", "--intervals", "6", "--out", str(tmp_path)]) == 0
    opt, base = summary(tmp_path)
    assert (opt["run"], base["run"]) == ("optimized", "baseline")
    assert float(opt["objective"]) <= float(base["objective"])
    assert float(opt["peak_i_h"]) < float(base["peak_i_h"])
    for name in ("trajectory.csv", "baseline_trajectory.csv"):
        assert_conserved(tmp_path / name)


def test_optimize_single(tmp_path):
    assert main(["optimize", "--single", "adulticide", "--intervals", "4", "--out", str(tmp_path)]) == 0
    _, rows = read_csv(tmp_path / "controls.csv")
    vals = np.array(rows, dtype=float)
    assert np.all(vals[:, 1] == 0.0) and np.all(vals[:, 3] == 1.0)
    assert_conserved(tmp_path / "trajectory.csv")


def test_nonconvergence_exit_code_still_writes(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("solver.max_iter = 1\n")
    out = tmp_path / "out"
    assert main(["optimize", "--intervals", "4", "--config", str(cfg), "--out", str(out)]) == 3
    assert "did not converge" in capsys.readouterr().err
    (row,) = summary(out)
    assert row["converged"] == "false"
    assert (out / "trajectory.csv").exists()


def test_unwritable_output_dir(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["simulate", "--out", str(blocker / "sub")]) == 1
    assert "error" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\ncontrols.alpha = 0\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "controls.alpha" in capsys.readouterr().err


def test_figure_file_names(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("r0.resolution = 5\n")
    args = ["figure", "fig1a", "fig4", "--intervals", "4", "--config", str(cfg), "--out", str(tmp_path / "f")]
    assert main(args) == 0
    names = sorted(p.name for p in (tmp_path / "f").iterdir())
    assert names == [
        "fig1a_r0_grid.csv",
        "fig1a_threshold.csv",
        "fig4_case_A.csv",
        "fig4_case_B.csv",
        "fig4_case_C.csv",
    ]
    header, rows = read_csv(tmp_path / "f" / "fig4_case_A.csv")
    assert header == ["t", "i_h"]


def test_runs_are_byte_identical(tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["optimize", "--intervals", "4", "--seed", "3", "--out", str(out)]) == 0
        outs.append({p.name: p.read_bytes() for p in out.iterdir()})
    assert outs[0] == outs[1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "vctrl", "r0", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "summary.csv").exists()
