import numpy as np
import pytest

from monomial_nfn.groups import GroupElement, MonomialElement, SubgroupKind, act_weights
from monomial_nfn.network import (CNN, FCNN, ActivationKind, InvarianceReport, check_invariance, deviation,
                                  forward)
from monomial_nfn.tensor import DimensionError, conv1d_valid
from monomial_nfn.weightspace import WeightSpacePoint, WeightSpaceSpec, random_point


def point(spec, W, b):
    return WeightSpacePoint(spec, tuple(np.array(w, dtype=float) for w in W), tuple(np.array(v, dtype=float) for v in b))


def test_zero_weights_give_last_bias():
    spec = WeightSpaceSpec.fcnn((3, 4, 2))
    U = WeightSpacePoint.unflatten(spec, np.zeros(26))
    U = point(spec, U.W, [np.zeros((4, 1)), [[1.5], [-2.0]]])
    for sigma in ActivationKind:
        assert np.array_equal(forward(U, FCNN(), sigma, [1.0, 2.0, 3.0]), [1.5, -2.0])


def test_single_layer_is_affine():
    spec = WeightSpaceSpec.fcnn((1, 1))
    U = point(spec, [[[[2.0]]]], [[[3.0]]])
    assert np.array_equal(forward(U, FCNN(), ActivationKind.RELU, [5.0]), [13.0])
    spec = WeightSpaceSpec.fcnn((3, 2))
    U = random_point(spec, 0)
    x = np.array([0.3, -1.0, 2.0])
    assert np.allclose(forward(U, FCNN(), ActivationKind.TANH, x), U.W[0][:, :, 0] @ x + U.b[0][:, 0])


def test_cnn_single_layer_matches_conv():
    spec = WeightSpaceSpec.cnn((1, 1), (2,))
    U = point(spec, [[[[1.0, 1.0]]]], [[[0.0]]])
    assert np.array_equal(forward(U, CNN(3), ActivationKind.RELU, [[1.0, 2.0, 3.0]]), [[3.0, 5.0]])


def test_cnn_two_layers_by_hand():
    spec = WeightSpaceSpec.cnn((1, 2, 1), (2, 1))
    rng = np.random.default_rng(0)
    U = random_point(spec, 1)
    x = rng.normal(size=(1, 5))
    h = np.stack([conv1d_valid(U.W[0][j, 0], x[0]) + U.b[0][j, 0] for j in range(2)])
    h = np.maximum(h, 0.0)
    ref = sum(conv1d_valid(U.W[1][0, k], h[k]) for k in range(2)) + U.b[1][0, 0]
    assert np.allclose(forward(U, CNN(5), ActivationKind.RELU, x)[0], ref, rtol=0, atol=1e-14)
    outer = forward(U, CNN(5, outer_activation=True), ActivationKind.RELU, x)[0]
    assert np.array_equal(outer, np.maximum(forward(U, CNN(5), ActivationKind.RELU, x)[0], 0.0))


def test_cnn_shrinking_signal_names_layer():
    spec = WeightSpaceSpec.cnn((1, 1, 1), (2, 3))
    with pytest.raises(DimensionError, match="layer 2"):
        forward(random_point(spec, 0), CNN(3), ActivationKind.RELU, np.zeros((1, 3)))


def test_kind_requirements():
    cnn_spec = WeightSpaceSpec.cnn((1, 2), (3,))
    with pytest.raises(DimensionError):
        forward(random_point(cnn_spec, 0), FCNN(), ActivationKind.RELU, [1.0])
    with pytest.raises(DimensionError):
        forward(random_point(WeightSpaceSpec.fcnn((2, 1)), 0), FCNN(), ActivationKind.RELU, [1.0])


def test_batched_inputs():
    spec = WeightSpaceSpec.fcnn((2, 3, 1))
    U = random_point(spec, 2)
    X = np.random.default_rng(3).normal(size=(7, 2))
    batched = forward(U, FCNN(), ActivationKind.SIN, X)
    for row, x in zip(batched, X):
        assert np.allclose(row, forward(U, FCNN(), ActivationKind.SIN, x), rtol=0, atol=1e-15)


def test_homogeneity_identity_for_relu_layers():
    rng = np.random.default_rng(4)
    W, x, b = rng.normal(size=(3, 2, 3)), rng.normal(size=(2, 8)), rng.normal(size=3)
    from monomial_nfn.tensor import conv1d_channels
    for a in (0.5, 4.0):
        lhs = a * np.maximum(conv1d_channels(W, x) + b[:, None], 0)
        rhs = np.maximum(conv1d_channels(a * W, x) + a * b[:, None], 0)
        assert np.array_equal(lhs, rhs)


def test_invariance_relu_positive():
    spec = WeightSpaceSpec.fcnn((3, 4, 5, 2))
    report = check_invariance(random_point(spec, 0), FCNN(), "relu", "positive", 200, 0, (0.5, 2.0))
    assert report.trials == 200
    assert report.max_rel_dev <= 1e-10


def test_invariance_tanh_signflip():
    spec = WeightSpaceSpec.fcnn((3, 4, 5, 2))
    report = check_invariance(random_point(spec, 1), FCNN(), "tanh", "signflip", 200, 0)
    assert report.max_rel_dev <= 1e-12


def test_invariance_cnn():
    spec = WeightSpaceSpec.cnn((2, 3, 2, 1), (3, 2, 2))
    for sigma, sub in (("relu", "positive"), ("sin", "signflip")):
        report = check_invariance(random_point(spec, 2), CNN(9), sigma, sub, 100, 5, (0.1, 10.0))
        assert report.max_rel_dev <= 1e-10


def test_negative_control_counterexample():
    spec = WeightSpaceSpec.fcnn((1, 1, 1))
    U = point(spec, [[[[1.0]]], [[[1.0]]]], [[[0.0]], [[0.0]]])
    flip = GroupElement((MonomialElement.identity(1), MonomialElement([-1.0], [0]), MonomialElement.identity(1)))
    ref = forward(U, FCNN(), ActivationKind.RELU, [1.0])
    out = forward(act_weights(flip, U), FCNN(), ActivationKind.RELU, [1.0])
    assert ref[0] == 1.0 and out[0] == 0.0
    assert deviation(ref, out)[1] > 1e-3
    report = check_invariance(random_point(WeightSpaceSpec.fcnn((2, 4, 1)), 3), FCNN(), "relu", "signflip", 50, 0)
    assert report.max_rel_dev > 1e-3


def test_report_merge_is_order_independent():
    reports = [InvarianceReport(1, a, r, t) for t, (a, r) in enumerate([(0.1, 0.2), (0.5, 0.3), (0.2, 0.3), (0.0, 0.0)])]
    forward_merge = reports[0]
    for r in reports[1:]:
        forward_merge = forward_merge.merge(r)
    backward_merge = reports[-1]
    for r in reversed(reports[:-1]):
        backward_merge = backward_merge.merge(r)
    assert forward_merge == backward_merge
    assert forward_merge.argmax_trial == 1 and forward_merge.trials == 4
    assert forward_merge.to_dict() == {"trials": 4, "max_abs_dev": 0.5, "max_rel_dev": 0.3, "argmax_trial": 1}


def test_check_invariance_is_seeded():
    spec = WeightSpaceSpec.fcnn((2, 3, 1))
    U = random_point(spec, 4)
    a = check_invariance(U, FCNN(), "relu", SubgroupKind.SIGN_FLIP, 30, 11)
    b = check_invariance(U, FCNN(), "relu", SubgroupKind.SIGN_FLIP, 30, 11)
    assert a == b
    head = check_invariance(U, FCNN(), "relu", "signflip", 10, 11)
    tail = check_invariance(U, FCNN(), "relu", "signflip", 20, 11, first_trial=10)
    assert head.merge(tail) == a
