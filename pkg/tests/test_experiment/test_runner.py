import dataclasses
import math
import os
import tempfile

import pytest
from minimal_eos.analysis import PhaseReport, detect_phases
from minimal_eos.dynamics import simulate
from minimal_eos.experiment.config import load_preset, parse_config
from minimal_eos.experiment.logger import LoggerWriter
from minimal_eos.experiment.runner import Cell, Runner, decay_slope, single_cell, summary_frame, sweep_cells
from minimal_eos.model import ModelConfig
from minimal_eos.regions import sample_X


@pytest.fixture(scope="module")
def short_run():
    return dataclasses.replace(load_preset("figure1"), steps=400, converge_epsilon=None)


def test_runner(short_run):
    with tempfile.TemporaryDirectory() as tmpdir:

        def logger_builder(i):
            return LoggerWriter(
                partition_id=i,
                stats_folder=tmpdir + "/stats",
            )

        runner = Runner(short_run, tmpdir, logger_builder=logger_builder)
        result = runner(single_cell(short_run))
        assert result.passed
        assert not result.diverged
        assert result.tag == ""
        files = sorted(os.listdir(tmpdir))
        assert "figure1.csv" in files
        assert "figure1.report.txt" in files
        assert "figure1.loss.svg" in files
        assert "figure1.sharpness.svg" in files
        assert os.listdir(tmpdir + "/stats") == ["0.json"]
        row = result.row()
        assert row["eta"] == 0.05
        assert row["t1"] == result.phases.t1


def test_runner_divergence_writes_partial_csv():
    run_config = parse_config(
        "\n".join(
            [
                "lambda1 = 100",
                "lambda2 = 0.01",
                "eta = 1",
                "allow_out_of_theory = true",
                "steps = 1000",
                "init = explicit",
                "alpha = 3",
                "beta1 = 1",
                "beta2 = 0.5",
                "mode = gd-unclipped",
                "name = blowup",
            ]
        )
    )
    with tempfile.TemporaryDirectory() as tmpdir:
        result = Runner(run_config, tmpdir)(single_cell(run_config))
        assert result.diverged
        assert result.passed is False
        with open(tmpdir + "/blowup.report.txt", encoding="utf-8") as f:
            text = f.read()
        assert "diverged" in text
        assert "out-of-region" in text
        with open(tmpdir + "/blowup.csv", encoding="utf-8") as f:
            assert len(f.read().strip().split("\n")) >= 2


def test_runner_gf_and_constrained_modes(short_run):
    with tempfile.TemporaryDirectory() as tmpdir:
        gf_config = dataclasses.replace(short_run, mode="gf", name="flow", grad_tol=1e-10, gf_sample_every=20000)
        result = Runner(gf_config, tmpdir)(single_cell(gf_config))
        assert result.passed
        constrained_config = dataclasses.replace(short_run, mode="constrained", name="pgd", steps=2000)
        result = Runner(constrained_config, tmpdir)(single_cell(constrained_config))
        assert result.passed
        files = os.listdir(tmpdir)
        for name in ("flow.csv", "flow.gf_loss.svg", "pgd.csv", "pgd.constrained_alpha.svg", "pgd.report.txt"):
            assert name in files


def test_sweep_cells_and_summary(short_run):
    cells = sweep_cells(short_run, [0.05, 1 / 12], [0, 1])
    assert [(c.eta, c.seed) for c in cells] == [(0.05, 0), (0.05, 1), (1 / 12, 0), (1 / 12, 1)]
    assert [c.index for c in cells] == [0, 1, 2, 3]
    assert cells[0].name == "figure1_eta0.05_seed0"
    with tempfile.TemporaryDirectory() as tmpdir:
        run_config = dataclasses.replace(short_run, outputs=["csv"])
        runner = Runner(run_config, tmpdir, force_report=True)
        results = [runner(cell) for cell in [cells[0], Cell(index=1, eta=1 / 12, seed=0, name="second")]]
    frame = summary_frame(results)
    assert list(frame["eta"]) == [0.05, 1 / 12]
    assert str(frame["t1"].dtype) == "Int64"
    assert list(frame.columns[:6]) == ["eta", "seed", "t1", "t2", "t3", "t4"]


def test_decay_slope_needs_two_records():
    cfg = ModelConfig(100.0, 0.01, 0.05)
    threshold = 0.5 * math.sqrt(cfg.lambda1 * cfg.eta / 2.0)
    start = next(p for p in (sample_X(cfg, seed) for seed in range(100)) if p.beta2 >= threshold)
    traj = simulate(cfg, start, 50)
    phases = detect_phases(traj)
    assert phases.t4 == 0
    assert math.isnan(decay_slope(traj, phases))
    assert math.isfinite(decay_slope(traj, PhaseReport()))
