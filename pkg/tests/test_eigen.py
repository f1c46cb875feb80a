import math

import numpy as np
import pytest
from minimal_eos.eigen import symmetric_eigenvalues, top_eigenpair
from minimal_eos.model import ModelConfig, Params, hessian, sharpness_info
from oracles import power_iteration, random_points


def test_diagonal_matrix():
    value, v, degenerate = top_eigenpair(np.diag([0.01, 100.0, 0.01]))
    assert value == 100.0
    assert not degenerate
    assert np.allclose(v, [0.0, 1.0, 0.0])


def test_eigenvalues_sorted():
    e1, e2, e3 = symmetric_eigenvalues([[2.0, 1.0, 0.0], [1.0, 2.0, 0.0], [0.0, 0.0, 5.0]])
    assert e1 == pytest.approx(5.0, rel=1e-12)
    assert e2 == pytest.approx(3.0, rel=1e-12)
    assert e3 == pytest.approx(1.0, rel=1e-12)


def test_identity_is_degenerate():
    value, v, degenerate = top_eigenpair(np.eye(3) * 3.0)
    assert degenerate
    assert value == pytest.approx(3.0)
    assert np.allclose(v, [0.0, 1.0, 0.0])


def test_degenerate_top_pair_prefers_beta1():
    # top eigenspace spanned by e_alpha and e_beta1
    value, v, degenerate = top_eigenpair(np.diag([4.0, 4.0, 1.0]))
    assert degenerate
    assert value == pytest.approx(4.0)
    assert abs(v[1]) == pytest.approx(1.0)


def test_top_value_matches_numpy():
    cfg = ModelConfig(100.0, 0.01, 0.05)
    for p in random_points(0, 1000):
        h = hessian(cfg, p)
        value, v, _ = top_eigenpair(h)
        reference = np.linalg.eigvalsh(h)
        scale = max(np.max(np.abs(reference)), 1.0)
        assert abs(value - reference[-1]) <= 1e-9 * scale
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)


def test_top_pair_matches_power_iteration():
    cfg = ModelConfig(100.0, 0.01, 0.05)
    compared = 0
    for p in random_points(1, 1000):
        h = hessian(cfg, p)
        eigenvalues = np.linalg.eigvalsh(h)
        shift = np.max(np.sum(np.abs(h), axis=1))
        # power iteration needs a spectral gap to converge in 10^4 iterations
        if (eigenvalues[-1] - eigenvalues[-2]) < 0.01 * (eigenvalues[-1] + shift):
            continue
        compared += 1
        value, v, _ = top_eigenpair(h)
        oracle_value, oracle_v = power_iteration(h)
        assert value == pytest.approx(oracle_value, rel=1e-9, abs=1e-9)
        assert abs(float(np.dot(v, oracle_v))) == pytest.approx(1.0, abs=1e-9)
    assert compared > 500


def test_decoupled_block_eigenvector():
    cfg = ModelConfig(100.0, 0.01, 0.05)
    info = sharpness_info(cfg, Params(0.6, 0.0, 5.0 / 3.0))
    assert info.value == pytest.approx(36.0, rel=1e-12)
    assert info.cos_beta1 == 1.0
    assert not math.isnan(info.eigvec[0])


def test_sharpness_info_compares_by_value():
    cfg = ModelConfig(100.0, 0.01, 0.05)
    p = Params(0.54, 0.005, 0.7)
    info = sharpness_info(cfg, p)
    assert info == sharpness_info(cfg, p)
    assert info != sharpness_info(cfg, Params(0.55, 0.005, 0.7))
    assert len(info.eigvec) == 3
    assert hash(info) == hash(sharpness_info(cfg, p))
