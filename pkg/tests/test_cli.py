import csv
import io
import re
from pathlib import Path

import pytest

from ehduty.cli import main
from ehduty.experiment import SWEEP_COLUMNS

GOLDEN = Path(__file__).parent / "golden"
TINY = ["--set", "n_runs=3", "--set", "tti_count=500"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def check_csv_format(text):
    assert text.endswith("\n") and "\r" not in text
    for row in rows(text)[1:]:
        for cell in row:
            if re.fullmatch(r"-?[0-9.]+(e[-+][0-9]+)?", cell) and "." in cell:
                significant = re.sub(r"e.*|\.|^-?0*\.?0*", "", cell)
                assert len(significant) <= 6


@pytest.mark.parametrize(
    "name, argv",
    [
        ("sweep_genie_knn.csv", ["sweep", "--densities", "10,20", "--policies", "genie,knn", *TINY]),
        ("matrix_default.csv", ["matrix"]),
        ("cluster_n20.csv", ["cluster", "--set", "n_devices=20"]),
        ("battery_emax12.csv", ["battery", "--set", "e_max=12", "--set", "e_tx=3"]),
    ],
)
def test_golden_outputs(capsys, name, argv):
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert out == (GOLDEN / name).read_text()
    check_csv_format(out)


def test_sweep_header_and_rows(capsys):
    code, out, _ = run(capsys, "sweep", "--densities", "10", "--policies", "genie", *TINY)
    assert code == 0
    table = rows(out)
    assert table[0] == SWEEP_COLUMNS
    assert len(table) == 2 and table[1][0] == "genie" and table[1][1] == "10"


def test_sweep_twice_identical(capsys):
    argv = ["sweep", "--densities", "10,30", "--policies", "random,grid", *TINY]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_sweep_svg_and_out(tmp_path, capsys):
    out = tmp_path / "fig.csv"
    code, _, _ = run(capsys, "sweep", "--densities", "10,20", "--policies", "genie,random", *TINY,
                     "--out", str(out), "--svg")
    assert code == 0
    assert rows(out.read_text())[0] == SWEEP_COLUMNS
    for metric in ("misdetection", "ec", "info"):
        svg = (tmp_path / f"fig_{metric}.svg").read_text()
        assert svg.lstrip().startswith("<?xml") and "<svg" in svg


def test_battery_without_harvest(capsys):
    code, out, _ = run(capsys, "battery", "--harvest-prob", "0")
    assert code == 0
    table = rows(out)
    level0 = next(r for r in table if r[0] == "level" and r[1] == "0")
    assert float(level0[2]) == 1.0
    summary = table[-1]
    assert summary[0] == "summary" and float(summary[4]) == 0.0


def test_matrix_without_events(capsys):
    code, out, _ = run(capsys, "matrix", "--on", "1", "--drx", "4", "--set", "alpha=0")
    assert code == 0
    table = {r[0]: r[1:] for r in rows(out)[1:]}
    assert float(table["s4"][0]) == 0.25
    assert float(table["s3"][0]) == 0


def test_cluster_reports_target(capsys):
    code, out, err = run(capsys, "cluster")
    assert code == 0
    assert "target 8" in err
    table = rows(out)
    assert table[0] == ["device_id", "x", "y", "cluster_id", "on", "drx", "offset"]
    assert len(table) == 101


def test_simulate_with_trace(tmp_path, capsys):
    out = tmp_path / "sim.csv"
    code, _, _ = run(capsys, "simulate", *TINY, "--set", "alpha=0.3", "--seed", "7", "--out", str(out), "--trace")
    assert code == 0
    summary = rows(out.read_text())
    assert summary[1][0] == "knn" and summary[1][9] == "7"
    trace = rows((tmp_path / "sim_trace.csv").read_text())
    assert trace[0][:3] == ["tti", "event", "epicenter_x"] and len(trace) == 501
    wake = rows((tmp_path / "sim_trace_wakeup.csv").read_text())
    assert wake[0] == ["event_id", "tti", "initial_info", "woken_count", "final_info"]


def test_config_file(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("n_devices = 15\npolicy = genie\nn_runs = 2\ntti_count = 200\n")
    code, out, _ = run(capsys, "simulate", "--config", str(conf))
    assert code == 0 and rows(out)[1][:2] == ["genie", "15"]


@pytest.mark.parametrize(
    "argv",
    [
        ["matrix", "--set", "alpha=1.5"],
        ["simulate", "--set", "nonsense=1"],
        ["sweep", "--densities", "ten"],
        ["frobnicate"],
        ["matrix", "--on", "3", "--drx", "2"],
    ],
)
def test_validation_errors_exit_1(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert "error" in err


def test_missing_config_is_runtime_error(capsys, tmp_path):
    code, _, err = run(capsys, "simulate", "--config", str(tmp_path / "absent.conf"))
    assert code == 2


def test_help_lists_defaults(capsys):
    code, out, _ = run(capsys, "--help")
    assert code == 0
    assert "k_neighbors = 5" in out and "simulate" in out
