import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from odcreg.exceptions import InvalidArgumentError, SingularMatrixError
from odcreg.machines import (
    PRESETS,
    HyperParams,
    cross_kernel,
    gpr_predict,
    kernel_matrix,
    preset,
    se_kernel,
    spd_inverse,
    train_gpr,
    train_tgp,
)

from conftest import SMALL_HYPER, random_pairs


def test_se_kernel_identical_points():
    assert se_kernel([1.0, 2.0], [1.0, 2.0], 7.0) == 1.0


def test_se_kernel_hand_value():
    assert se_kernel([0.0], [3.0], 3.0) == pytest.approx(np.exp(-1.0), abs=1e-12)
    assert se_kernel([0.0], [3.0], 3.0) == pytest.approx(0.367879, abs=1e-6)


def test_se_kernel_squared_switch():
    assert se_kernel([0.0], [3.0], 9.0, squared=True) == pytest.approx(np.exp(-1.0))


def test_se_kernel_rejects_bad_denominator():
    with pytest.raises(InvalidArgumentError):
        se_kernel([0.0], [1.0], 0.0)


def test_kernel_matrix_single_point():
    np.testing.assert_array_equal(kernel_matrix(np.array([[0.3, 0.4]]), 5.0), [[1.0]])


def test_kernel_matrix_identical_points_is_all_ones():
    K = kernel_matrix(np.zeros((2, 3)), 5.0)
    np.testing.assert_array_equal(K, np.ones((2, 2)))


def test_kernel_matrix_matches_elementwise(rng):
    P = rng.standard_normal((5, 3))
    K = kernel_matrix(P, 2.5)
    for i in range(5):
        for j in range(5):
            assert K[i, j] == pytest.approx(se_kernel(P[i], P[j], 2.5), abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 4), st.floats(0.1, 50.0), st.booleans())
def test_kernel_matrix_properties(n, d, denom, squared):
    P = np.random.default_rng(n * 31 + d).standard_normal((n, d))
    K = kernel_matrix(P, denom, squared)
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_array_equal(np.diag(K), 1.0)
    assert np.all((K > 0) & (K <= 1))
    np.testing.assert_allclose(cross_kernel(P, P, denom, squared), K, atol=1e-14)


def test_spd_inverse_singular():
    with pytest.raises(SingularMatrixError):
        spd_inverse(np.ones((2, 2)))


def test_presets_available():
    assert preset("POSER") is PRESETS["poser"]
    assert preset("humaneva").rho_y2 == 500000.0
    with pytest.raises(InvalidArgumentError):
        preset("nope")


def test_hyper_validation_and_roundtrip():
    with pytest.raises(InvalidArgumentError):
        HyperParams(rho_x2=0.0)
    with pytest.raises(InvalidArgumentError):
        HyperParams(lambda_x=-1.0)
    h = HyperParams(sigma_n2=[0.1, 0.2])
    assert HyperParams.from_dict(h.to_dict()) == h
    np.testing.assert_array_equal(h.noise(2), [0.1, 0.2])
    with pytest.raises(InvalidArgumentError):
        h.noise(3)


def test_gpr_single_pair_noiseless():
    m = train_gpr([[0.5]], [[2.0]], HyperParams(sigma_n2=0.0))
    mean, var = gpr_predict(m, [0.5])
    assert mean == pytest.approx([2.0])
    assert var == pytest.approx([0.0], abs=1e-15)


def test_gpr_single_pair_with_noise():
    s = 0.3
    m = train_gpr([[0.5]], [[2.0]], HyperParams(sigma_n2=s))
    mean, var = gpr_predict(m, [0.5])
    assert mean[0] == pytest.approx(2.0 / (1 + s), abs=1e-14)
    assert var[0] == pytest.approx(s / (1 + s), abs=1e-14)


def test_gpr_matches_direct_solve(rng):
    X, Y = random_pairs(rng, 20, d_X=3, d_Y=2)
    hyper = HyperParams(rho_x2=3.0, sigma_n2=[1e-2, 5e-2])
    m = train_gpr(X, Y, hyper)
    K = np.exp(-np.linalg.norm(X[:, None] - X[None], axis=2) / 3.0)
    for _ in range(10):
        x = rng.standard_normal(3)
        k = np.exp(-np.linalg.norm(X - x, axis=1) / 3.0)
        mean, var = gpr_predict(m, x)
        for j, s in enumerate([1e-2, 5e-2]):
            z = np.linalg.solve(K + s * np.eye(20), k)
            assert mean[j] == pytest.approx(z @ Y[:, j], abs=1e-8)
            assert var[j] == pytest.approx(1 - k @ z, abs=1e-8)


def test_gpr_dimension_mismatch():
    m = train_gpr(np.zeros((3, 2)) + np.arange(3)[:, None], np.zeros((3, 1)))
    with pytest.raises(InvalidArgumentError):
        gpr_predict(m, [1.0, 2.0, 3.0])
    with pytest.raises(InvalidArgumentError):
        train_gpr(np.zeros((3, 2)), np.zeros((4, 1)))


def test_tgp_training_inverses(rng):
    X = np.array([[0.0], [1.0]])
    m = train_tgp(X, [[0.0], [1.0]], HyperParams(lambda_x=0.1, lambda_y=0.1))
    Kx = kernel_matrix(X, m.hyper.rho_x2)
    np.testing.assert_allclose(m.Kx_inv @ (Kx + 0.1 * np.eye(2)), np.eye(2), atol=1e-10)
    with pytest.raises(SingularMatrixError):
        train_tgp(np.zeros((2, 1)), [[0.0], [1.0]], HyperParams(lambda_x=0.0))
    X, Y = random_pairs(rng, 10)
    m = train_tgp(X, Y, SMALL_HYPER)
    assert np.max(np.abs(m.Kx_inv - m.Kx_inv.T)) < 1e-12
