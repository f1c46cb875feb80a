import dataclasses

import pytest
from minimal_eos.dynamics import gf_integrate, simulate
from minimal_eos.errors import DivergedError
from minimal_eos.experiment.config import load_preset
from minimal_eos.experiment.verify import (
    EXEMPT_NOTE,
    OUTSIDE_NOTE,
    diverged_report,
    verify_gf_result,
    verify_trajectory,
)
from minimal_eos.model import ModelConfig, Params
from minimal_eos.regions import sample_X, sample_X_tilde


@pytest.fixture(scope="module")
def figure1_config():
    return load_preset("figure1")


def test_figure1_suite_passes(figure1_config):
    cfg = figure1_config.model_config()
    traj = simulate(cfg, figure1_config.initial_params(), figure1_config.steps)
    report, phases = verify_trajectory(figure1_config, traj)
    assert report.passed, report.failed()
    names = [c.name for c in report.checks]
    assert "param_sharpness_lower" in names
    assert "gfs_lower" in names
    assert "final_loss" in names
    assert "abnormal_events" in names
    assert phases.t1 is not None


def test_printed_max_is_exempt(figure1_config):
    run_config = dataclasses.replace(figure1_config, clip_variant="printed-max", steps=500, converge_epsilon=None)
    cfg = run_config.model_config()
    traj = simulate(cfg, run_config.initial_params(), run_config.steps, clip_variant="printed-max")
    report, _ = verify_trajectory(run_config, traj)
    exempt = [c for c in report.checks if c.note == EXEMPT_NOTE]
    assert exempt
    assert all(c.skipped and c.passed for c in exempt)


def test_outside_X_is_reported(figure1_config):
    run_config = dataclasses.replace(figure1_config, alpha=0.3, steps=50, converge_epsilon=None)
    cfg = run_config.model_config()
    traj = simulate(cfg, run_config.initial_params(), run_config.steps)
    report, _ = verify_trajectory(run_config, traj)
    assert report.check("theorem_suite").skipped
    assert report.check("theorem_suite").note == OUTSIDE_NOTE
    assert report.check("convergence_time").skipped
    assert report.passed


def test_eos_checks_for_X_tilde_start(figure1_config):
    run_config = dataclasses.replace(figure1_config, eta=1 / 12, steps=5000, converge_epsilon=None)
    cfg = run_config.model_config()
    traj = simulate(cfg, sample_X_tilde(cfg, 0), run_config.steps)
    report, _ = verify_trajectory(run_config, traj)
    assert report.check("eos_sharpness_at_t2").passed
    assert report.check("eos_sharpness_at_t3").passed


def test_gf_result_checks():
    cfg = ModelConfig(100.0, 0.01, 0.05)
    p0 = sample_X(cfg, 4)
    result = gf_integrate(cfg, p0, grad_tol=1e-10, sample_every=10000)
    report = verify_gf_result(cfg, p0, result)
    assert report.passed, report.failed()
    assert [c.name for c in report.checks] == [
        "gf_conservation",
        "gf_minimizer_product",
        "gf_minimizer_beta1",
        "gfs_analytic_agreement",
    ]


def test_diverged_report():
    error = DivergedError("boom", last_state=Params(1.0, 0.0, 1.0), step=12)
    report = diverged_report(error)
    assert not report.passed
    assert report.check("diverged").first_violation == 12
