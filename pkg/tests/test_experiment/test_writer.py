import os
import tempfile

import pandas as pd
import pytest
from minimal_eos.analysis import CheckResult, VerificationReport
from minimal_eos.dynamics import Trajectory, make_record, simulate
from minimal_eos.experiment.writer import (
    CSV_COLUMNS,
    CsvWriter,
    ReportWriter,
    SvgWriter,
    format_report,
    read_trajectory_csv,
    trajectory_frame,
)
from minimal_eos.model import ModelConfig, Params
from minimal_eos.svg import LinePlot

CFG = ModelConfig(100.0, 0.01, 0.05)


@pytest.fixture(scope="module")
def trajectory():
    return simulate(CFG, Params(0.54, 0.005, 0.7), 300)


def test_csv_columns_and_format(trajectory):
    with tempfile.TemporaryDirectory() as tmpdir:
        path = CsvWriter(tmpdir)("run", trajectory)
        assert path.endswith("run.csv")
        with open(os.path.join(tmpdir, "run.csv"), encoding="utf-8") as f:
            lines = f.read().split("\n")
        assert lines[0] == ",".join(CSV_COLUMNS)
        assert len(lines) == len(trajectory) + 2
        first = lines[1].split(",")
        assert first[0] == "0"
        assert first[1] == "5.4000000000000004e-01"
        assert first[-1] == "0"


def test_csv_is_byte_deterministic(trajectory):
    with tempfile.TemporaryDirectory() as tmpdir:
        CsvWriter(tmpdir + "/a")("run", trajectory)
        CsvWriter(tmpdir + "/b")("run", simulate(CFG, Params(0.54, 0.005, 0.7), 300))
        with open(tmpdir + "/a/run.csv", "rb") as f:
            a = f.read()
        with open(tmpdir + "/b/run.csv", "rb") as f:
            b = f.read()
        assert a == b


def test_csv_replay_round_trip(trajectory):
    with tempfile.TemporaryDirectory() as tmpdir:
        CsvWriter(tmpdir)("run", trajectory)
        replay = read_trajectory_csv(tmpdir + "/run.csv", CFG)
        assert replay.consistent, replay.mismatches[:5]
        assert len(replay.trajectory) == len(trajectory)
        assert replay.trajectory[10].params == trajectory[10].params


def test_tampered_csv_is_detected(trajectory):
    with tempfile.TemporaryDirectory() as tmpdir:
        frame = trajectory_frame(trajectory)
        frame.loc[5, "loss"] = frame.loc[5, "loss"] * 1.001
        CsvWriter(tmpdir).write_frame("run", frame)
        replay = read_trajectory_csv(tmpdir + "/run.csv", CFG)
        assert not replay.consistent
        assert replay.mismatches[0][:2] == (5, "loss")


def test_missing_column(trajectory):
    with tempfile.TemporaryDirectory() as tmpdir:
        CsvWriter(tmpdir).write_frame("bad", pd.DataFrame({"t": [0], "alpha": [0.5]}))
        with pytest.raises(ValueError):
            read_trajectory_csv(tmpdir + "/bad.csv", CFG)


def test_report_format():
    report = VerificationReport(
        [
            CheckResult(name="a", bound="x <= 1", worst_slack=0.5),
            CheckResult(name="b", bound="y >= 0", passed=False, first_violation=7, worst_slack=-2.0, note="n"),
            CheckResult(name="c", bound="z", skipped=True, note="exempt"),
        ]
    )
    text = format_report(report, ["run demo"])
    lines = text.strip().split("\n")
    assert lines[0] == "# run demo"
    assert lines[1] == "a | x <= 1 | 5.000000e-01 | PASS"
    assert lines[2] == "b | y >= 0 | -2.000000e+00 | FAIL | first violation at t=7 | n"
    assert lines[3] == "c | z | n/a | SKIP | exempt"
    assert lines[4] == "overall | all checks | - | FAIL"


def test_report_and_svg_writers():
    with tempfile.TemporaryDirectory() as tmpdir:
        ReportWriter(tmpdir)("run", VerificationReport(), ["header"])
        SvgWriter(tmpdir)("run.loss", LinePlot("loss").add_series("L", [0, 1], [1, 2]))
        assert sorted(os.listdir(tmpdir)) == ["run.loss.svg", "run.report.txt"]


def _forge_alpha(trajectory, t, factor):
    """scale alpha at step t and rebuild that row's derived values so they agree with the forged state"""
    records = list(trajectory.records)
    p = records[t].params
    records[t] = make_record(CFG, t, Params(p.alpha * factor, p.beta1, p.beta2), records[t].beta1_clipped)
    return Trajectory(config=CFG, records=records)


def test_forged_parameters_are_detected(trajectory):
    with tempfile.TemporaryDirectory() as tmpdir:
        CsvWriter(tmpdir)("run", _forge_alpha(trajectory, 150, 1.001))
        replay = read_trajectory_csv(tmpdir + "/run.csv", CFG)
        assert not replay.consistent
        assert replay.mismatches[0][:2] == (150, "alpha")
        assert {m[0] for m in replay.mismatches} <= {150, 151}
        assert all(m[1] in ("alpha", "beta1", "beta2", "clipped") for m in replay.mismatches)


def test_replay_checks_the_clip_rule():
    clipped_run = simulate(CFG, Params(0.5, 0.5, 0.5), 5)
    assert clipped_run[1].beta1_clipped
    with tempfile.TemporaryDirectory() as tmpdir:
        CsvWriter(tmpdir)("run", clipped_run)
        assert read_trajectory_csv(tmpdir + "/run.csv", CFG).consistent
        unclipped = read_trajectory_csv(tmpdir + "/run.csv", CFG, unclipped=True)
        assert not unclipped.consistent
        assert unclipped.mismatches[0][:2] == (1, "beta1")
