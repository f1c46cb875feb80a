import math

import numpy as np
import pytest
from minimal_eos.analysis import (
    T4_AT_START_NOTE,
    CheckResult,
    PhaseReport,
    VerificationReport,
    convergence_time,
    decay_reference,
    detect_abnormal,
    detect_phases,
    fit_decay_slope,
    gfs_bounds,
    verify_eos_phases,
    verify_gfs,
    verify_global_convergence,
    verify_lhat,
    verify_param_lemma,
    verify_product_invariant,
    verify_sharpness_bands,
)
from minimal_eos.dynamics import Trajectory, gfs_analytic, make_record, simulate
from minimal_eos.errors import PreconditionError
from minimal_eos.model import ModelConfig, Params
from minimal_eos.regions import sample_X, sample_X_tilde

CFG = ModelConfig(100.0, 0.01, 0.05)
FIGURE1_START = Params(0.54, 0.005, 0.7)


def synthetic(cfg, points):
    return Trajectory(config=cfg, records=[make_record(cfg, t, p) for t, p in enumerate(points)])


@pytest.fixture(scope="module")
def figure1():
    return simulate(CFG, FIGURE1_START, 10000)


def test_decay_reference():
    ref = decay_reference(CFG)
    assert ref.fast == pytest.approx(0.99920016, rel=1e-12)
    assert ref.constrained == pytest.approx(0.99960004, rel=1e-12)
    assert ref.slow == pytest.approx(0.99980001, rel=1e-12)
    assert ref.log_constrained == pytest.approx(2 * math.log(1 - 2e-4), rel=1e-12)


def test_phases_constant_alpha():
    traj = synthetic(CFG, [Params(0.54, 0.005, 0.7)] * 5)
    phases = detect_phases(traj)
    assert phases.t2 is None and phases.t3 is None
    assert phases.spikes == []


def test_phases_thresholds():
    t4_threshold = 0.5 * math.sqrt(2.5)
    assert t4_threshold == pytest.approx(0.79057, abs=1e-5)
    points = [
        Params(0.50, 0.005, 0.70),
        Params(0.53, 0.005, 0.75),
        Params(0.56, 0.005, 0.78),
        Params(0.55, 0.005, t4_threshold),
        Params(0.54, 0.005, 0.80),
        Params(0.545, 0.005, 0.81),
    ]
    phases = detect_phases(synthetic(CFG, points))
    assert phases.t1 == 2
    assert phases.t2 == 2
    assert phases.t3 == 4
    assert phases.t4 == 3


def test_phases_empty_trajectory():
    with pytest.raises(PreconditionError):
        detect_phases(Trajectory(config=CFG))


def test_fit_decay_slope_geometric():
    k = CFG.clip_alpha
    rho, c = 0.999, 0.2
    points = [Params(0.5, 0.0, (1.0 - math.sqrt(2.0 * c * rho**t)) / k) for t in range(50)]
    traj = synthetic(CFG, points)
    assert fit_decay_slope(traj, (0, 49)) == pytest.approx(math.log(rho), abs=1e-12)
    with pytest.raises(PreconditionError):
        fit_decay_slope(traj, (3, 3))


def test_gfs_bounds_example():
    bounds = gfs_bounds(CFG, Params(0.5, 0.0, 0.5))
    assert bounds.lower == pytest.approx(-2.5 + 50 * math.sqrt(4.0025), rel=1e-12)
    assert bounds.lower == pytest.approx(97.531, abs=1e-3)
    assert bounds.upper == pytest.approx(29.5 + 50 * math.sqrt(4.3481), rel=1e-12)
    assert bounds.upper == pytest.approx(133.76, abs=1e-2)


def test_param_lemma_figure1(figure1):
    report = verify_param_lemma(figure1)
    assert report.passed, report.failed()
    assert len(report.checks) == 4


def test_param_lemma_violation_names_step():
    traj = synthetic(CFG, [FIGURE1_START, Params(0.54, 0.54, 0.71)])
    report = verify_param_lemma(traj)
    check = report.check("param_eigvec_alignment")
    assert not check.passed
    assert check.first_violation == 1
    assert check.worst_slack < 0


def test_param_lemma_needs_X_start():
    with pytest.raises(PreconditionError):
        verify_param_lemma(synthetic(CFG, [Params(0.3, 0.005, 0.7)]))


def test_sharpness_bands_figure1(figure1):
    phases = detect_phases(figure1)
    assert phases.t1 is not None
    report = verify_sharpness_bands(figure1, phases)
    assert report.passed, report.failed()


def test_sharpness_band_violation():
    traj = synthetic(CFG, [FIGURE1_START, Params(0.3, 0.005, 0.71)])
    report = verify_sharpness_bands(traj, detect_phases(traj))
    check = report.check("band_pre_t1_lower")
    assert not check.passed
    assert check.first_violation == 1


def test_lhat_figure1(figure1):
    phases = detect_phases(figure1)
    assert phases.t4 is not None
    report = verify_lhat(figure1, phases)
    assert report.passed, report.failed()
    ref = decay_reference(CFG)
    slope = fit_decay_slope(figure1, (0, phases.t4))
    assert math.log(ref.fast) <= slope <= math.log(ref.slow)


def test_lhat_skipped_without_t4():
    traj = synthetic(CFG, [FIGURE1_START, Params(0.541, 0.005, 0.701)])
    report = verify_lhat(traj, PhaseReport())
    assert all(c.skipped for c in report.checks)
    assert report.passed


def test_lhat_start_past_t4_threshold():
    threshold = 0.5 * math.sqrt(CFG.lambda1 * CFG.eta / 2.0)
    starts = [sample_X(CFG, seed) for seed in range(100)]
    late = [p for p in starts if p.beta2 >= threshold]
    assert late
    traj = simulate(CFG, late[0], 200)
    phases = detect_phases(traj)
    assert phases.t4 == 0
    report = verify_lhat(traj, phases)
    assert report.passed, report.failed()
    assert all(c.note == T4_AT_START_NOTE for c in report.checks)


def test_lhat_sandwich_stops_before_t4(figure1):
    phases = detect_phases(figure1)
    records = list(figure1.records[: phases.t4 + 1])
    # lhat vanishes at beta2 = sqrt(lambda1 eta / 2) while L2 stays positive
    outside = Params(0.5, records[-1].params.beta1, math.sqrt(CFG.lambda1 * CFG.eta / 2.0))
    assert CFG.lambda2 * make_record(CFG, 0, outside).parts.lhat < 0.75 * make_record(CFG, 0, outside).parts.l2
    records[-1] = make_record(CFG, phases.t4, outside)
    report = verify_lhat(Trajectory(config=CFG, records=records), phases)
    assert report.check("lhat_sandwich_lower").passed
    assert report.check("lhat_sandwich_upper").passed
    assert report.check("lhat_sandwich_lower").first_violation is None


@pytest.mark.parametrize("seed", range(100))
def test_theorem_suite_on_sampled_X_starts(seed):
    p0 = sample_X(CFG, seed)
    traj = simulate(CFG, p0, 10000)
    phases = detect_phases(traj)
    report = VerificationReport.merge(
        verify_param_lemma(traj),
        verify_sharpness_bands(traj, phases),
        verify_lhat(traj, phases),
        verify_gfs(traj),
        verify_product_invariant(traj),
    )
    assert report.passed, (p0, report.failed())


def test_gfs_figure1(figure1):
    report = verify_gfs(figure1)
    assert report.passed, report.failed()


def test_gfs_equal_start():
    cfg = ModelConfig(100.0, 0.01, 1 / 12)
    assert gfs_analytic(cfg, Params(0.45, 0.004, 0.45)).phi >= 99.0


def test_product_and_convergence_figure1(figure1):
    assert verify_product_invariant(figure1).passed
    report = verify_global_convergence(figure1, epsilon=1e-4, delta=0.1)
    assert report.passed, report.failed()
    t = convergence_time(figure1, 1e-4, 0.1)
    assert t is not None and t < len(figure1)


def test_convergence_time_not_reached():
    traj = synthetic(CFG, [FIGURE1_START] * 3)
    assert convergence_time(traj, 1e-8, 0.1) is None
    assert not verify_global_convergence(traj, epsilon=1e-8).passed


@pytest.mark.parametrize("seed", range(100))
def test_eos_phases(seed):
    cfg = ModelConfig(100.0, 0.01, 1 / 12)
    traj = simulate(cfg, sample_X_tilde(cfg, seed), 5000)
    phases = detect_phases(traj)
    report = verify_eos_phases(traj, phases)
    assert report.passed, report.failed()
    assert phases.t2 < phases.t3


def test_eos_phases_missing():
    traj = synthetic(CFG, [FIGURE1_START] * 3)
    report = verify_eos_phases(traj, detect_phases(traj))
    assert not report.passed
    assert report.check("eos_phase_order").note == "T2 or T3 not detected"


def test_decay_slope_independent_of_eta():
    p0 = Params(0.48, 0.004, 0.5)
    expected = decay_reference(CFG).log_constrained
    slopes = []
    for eta in (1 / 20, 1 / 12):
        traj = simulate(CFG.with_eta(eta), p0, 10000)
        phases = detect_phases(traj)
        end = phases.t4 if phases.t4 is not None else len(traj) - 1
        slopes.append(fit_decay_slope(traj, (0, end)))
    assert slopes[0] == pytest.approx(slopes[1], rel=0.2)
    for slope in slopes:
        assert slope == pytest.approx(expected, rel=0.2)


def test_detect_abnormal():
    traj = synthetic(CFG, [Params(0.5, 0.0, 0.5), Params(-0.5, 0.0, 0.5), Params(0.1, 0.0, 0.5)])
    events = detect_abnormal(traj, collapse_threshold=0.1)
    kinds = [(e.step, e.kind) for e in events]
    assert (1, "alpha_sign_flip") in kinds
    assert (2, "alpha_sign_flip") in kinds
    assert (2, "alpha_collapse") in kinds
    assert detect_abnormal(synthetic(CFG, [FIGURE1_START] * 2)) == []


def test_report_helpers():
    a = VerificationReport([CheckResult(name="a", bound="x")])
    b = VerificationReport([CheckResult(name="b", bound="y", passed=False, first_violation=3, worst_slack=-1.0)])
    merged = VerificationReport.merge(a, b)
    assert [c.name for c in merged.checks] == ["a", "b"]
    assert not merged.passed
    assert merged.failed()[0].name == "b"
    assert merged.check("b").status == "FAIL"
    assert CheckResult(name="c", bound="z", skipped=True).status == "SKIP"
    with pytest.raises(KeyError):
        merged.check("missing")
    assert np.isinf(merged.check("a").worst_slack)
