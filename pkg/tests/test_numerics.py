import numpy as np
import pytest

from partmatch.numerics import (
    cosine_sim,
    fd_gradient,
    gelu,
    layer_norm,
    sigmoid,
    softmax_rows,
    sorted_sum,
    unit_rows,
)


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((5, 7)) * 50
    out = softmax_rows(m)
    assert np.allclose(out.sum(axis=1), 1.0, atol=1e-12)
    assert np.all(out >= 0)


def test_softmax_rows_stable_at_large_logits():
    out = softmax_rows(np.array([[1000.0, 1000.0, -1000.0]]))
    assert np.isfinite(out).all()
    assert out[0, 0] == pytest.approx(0.5)


def test_softmax_rows_rejects_bad_shape():
    with pytest.raises(ValueError):
        softmax_rows(np.zeros(3))


def test_gelu_known_values():
    # x * Phi(x): at 0 exactly 0; at large x approaches x; odd-ish asymmetry
    assert gelu(0.0) == 0.0
    assert gelu(10.0) == pytest.approx(10.0, abs=1e-9)
    assert gelu(-10.0) == pytest.approx(0.0, abs=1e-9)
    # oracle via scipy's normal CDF
    from scipy.stats import norm

    for x in (-1.3, -0.2, 0.7, 2.1):
        assert gelu(x) == pytest.approx(x * norm.cdf(x), rel=1e-12)


def test_sigmoid_stable_and_symmetric():
    assert sigmoid(0.0) == 0.5
    assert sigmoid(800.0) == 1.0
    assert sigmoid(-800.0) == pytest.approx(0.0, abs=1e-300)
    x = np.linspace(-30, 30, 11)
    assert np.allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-15)


def test_layer_norm_zero_mean_unit_variance():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((4, 32)) * 7 + 3
    out = layer_norm(v, np.ones(32), np.zeros(32))
    assert np.abs(out.mean(axis=-1)).max() < 1e-12
    assert np.abs(out.var(axis=-1) - 1.0).max() < 1e-6


def test_layer_norm_zero_variance_row_maps_to_bias():
    v = np.full((1, 8), 3.7)
    gain = np.full(8, 2.0)
    bias = np.full(8, -1.0)
    out = layer_norm(v, gain, bias)
    assert np.array_equal(out, np.full((1, 8), -1.0))


def test_layer_norm_affine_applied_after_normalization():
    rng = np.random.default_rng(2)
    v = rng.standard_normal((3, 16))
    gain = rng.standard_normal(16)
    bias = rng.standard_normal(16)
    base = layer_norm(v, np.ones(16), np.zeros(16))
    assert np.allclose(layer_norm(v, gain, bias), gain * base + bias)


def test_cosine_sim_bounds_and_errors():
    assert cosine_sim([1, 0, 0], [2, 0, 0]) == pytest.approx(1.0)
    assert cosine_sim([1, 0, 0], [0, 5, 0]) == pytest.approx(0.0)
    assert cosine_sim([1, 0, 0], [-3, 0, 0]) == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        cosine_sim([0, 0, 0], [1, 0, 0])


def test_unit_rows():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((6, 9)) * 4
    out = unit_rows(m)
    assert np.allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        unit_rows(np.zeros((2, 3)))


def test_fd_gradient_matches_analytic_quadratic():
    a = np.array([[2.0, 0.5], [0.5, 3.0]])

    def f(x):
        return float(x @ a @ x)

    x0 = np.array([0.3, -1.2])
    numeric = fd_gradient(f, x0.copy())
    assert np.allclose(numeric, 2.0 * a @ x0, atol=1e-6)


def test_sorted_sum_matches_plain_sum_and_is_order_invariant():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((5, 17))
    assert np.allclose(sorted_sum(a, axis=1), a.sum(axis=1), atol=1e-12)
    perm = rng.permutation(17)
    assert np.array_equal(sorted_sum(a, axis=1), sorted_sum(a[:, perm], axis=1))
