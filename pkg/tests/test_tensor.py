import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monomial_nfn.tensor import DimensionError, as_tensor, conv1d_channels, conv1d_valid, elementwise, matmul


def test_matmul_identity_and_diagonal():
    m = [[1.0, 2.0], [3.0, 4.0]]
    assert np.array_equal(matmul(np.eye(2), m), m)
    assert np.array_equal(matmul([[2.0, 0.0], [0.0, 3.0]], [1.0, 1.0]), [2.0, 3.0])


def test_matmul_matches_triple_loop():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(3, 4)), rng.normal(size=(4, 2))
    ref = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            for k in range(4):
                ref[i, j] += a[i, k] * b[k, j]
    assert np.allclose(matmul(a, b), ref, rtol=0, atol=1e-14)


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(np.ones((2, 3)), np.ones((2, 2)))


def test_matmul_associative():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n, k, m, p = rng.integers(1, 6, size=4)
        a, b, c = rng.normal(size=(n, k)), rng.normal(size=(k, m)), rng.normal(size=(m, p))
        left, right = matmul(matmul(a, b), c), matmul(a, matmul(b, c))
        assert np.max(np.abs(left - right)) <= 1e-9 * max(1.0, np.max(np.abs(left)))


def test_conv1d_examples():
    assert np.array_equal(conv1d_valid([1.0], [5.0, 6.0, 7.0]), [5.0, 6.0, 7.0])
    assert np.array_equal(conv1d_valid([1.0, 1.0], [1.0, 2.0, 3.0]), [3.0, 5.0])
    assert np.array_equal(conv1d_valid([0.0, 0.0], [4.0, -1.0, 9.0]), [0.0, 0.0])


def test_conv1d_too_short():
    with pytest.raises(DimensionError):
        conv1d_valid([1.0, 2.0, 3.0], [1.0, 2.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(0, 6), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_conv1d_bilinear(m, extra, alpha, beta, seed):
    rng = np.random.default_rng(seed)
    k, x, y = rng.normal(size=m), rng.normal(size=m + extra), rng.normal(size=m + extra)
    lhs = conv1d_valid(k, alpha * x + beta * y)
    rhs = alpha * conv1d_valid(k, x) + beta * conv1d_valid(k, y)
    assert np.allclose(lhs, rhs, rtol=0, atol=1e-10)
    k2 = rng.normal(size=m)
    assert np.allclose(conv1d_valid(alpha * k + beta * k2, x),
                       alpha * conv1d_valid(k, x) + beta * conv1d_valid(k2, x), rtol=0, atol=1e-10)


def test_conv1d_channels_sums_single_channel_convs():
    rng = np.random.default_rng(3)
    w, x = rng.normal(size=(2, 3, 2)), rng.normal(size=(3, 6))
    out = conv1d_channels(w, x)
    for j in range(2):
        ref = sum(conv1d_valid(w[j, k], x[k]) for k in range(3))
        assert np.allclose(out[j], ref, rtol=0, atol=1e-14)


def test_elementwise_examples():
    assert np.array_equal(elementwise("relu", [-1.0, 0.0, 2.0]), [0.0, 0.0, 2.0])
    assert elementwise("tanh", [0.0])[0] == 0.0
    assert abs(elementwise("sin", [math.pi / 2])[0] - 1.0) <= 1e-12


def test_relu_positively_homogeneous_exact():
    x = np.random.default_rng(4).normal(size=100)
    for lam in (0.25, 2.0, 1024.0):
        assert np.array_equal(elementwise("relu", lam * x), lam * elementwise("relu", x))


def test_as_tensor_rejects_empty_and_wrong_shape():
    with pytest.raises(DimensionError):
        as_tensor(np.zeros((0, 2)))
    with pytest.raises(DimensionError):
        as_tensor([1.0, 2.0], shape=(3,))
