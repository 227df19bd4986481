import numpy as np
import pytest

from monomial_nfn.groups import SubgroupKind
from monomial_nfn.network import ActivationKind
from monomial_nfn.preservation import classify_monomial, commutation_defect, is_preserved, monomial_grid
from monomial_nfn.tensor import DimensionError


def test_identity_preserved_by_all():
    for sigma in ActivationKind:
        assert is_preserved(np.eye(3), sigma).preserved


def test_positive_diagonal_relu():
    assert is_preserved(np.diag([2.0, 3.0]), "relu").preserved
    assert not is_preserved(np.diag([2.0, 3.0]), "tanh").preserved


def test_tanh_diag_witness():
    v = is_preserved(np.diag([2.0, 1.0]), "tanh")
    assert not v.preserved
    x = v.witness_x
    dev = commutation_defect(v.witness_matrix, "tanh", x[None, :])[0]
    assert abs(dev - v.deviation) <= 1e-12
    # the unit probe alone already separates tanh(2) from 2 tanh(1)
    e1 = np.array([[1.0, 0.0]])
    assert abs(commutation_defect(np.diag([2.0, 1.0]), "tanh", e1)[0] - abs(np.tanh(2) - 2 * np.tanh(1))) < 1e-15


def test_shear_not_preserved_by_relu():
    A = np.array([[1.0, 1.0], [0.0, 1.0]])
    v = is_preserved(A, "relu")
    assert not v.preserved
    probe = np.array([[1.0, -1.0]])
    assert commutation_defect(A, "relu", probe)[0] == 1.0
    d = v.to_dict()
    assert d["witness"]["matrix"] == A.tolist()


def test_witness_reproduces_deviation():
    rng = np.random.default_rng(0)
    for _ in range(50):
        A = rng.normal(size=(3, 3))
        for sigma in ActivationKind:
            v = is_preserved(A, sigma, seed=1)
            if not v.preserved:
                dev = commutation_defect(v.witness_matrix, sigma, v.witness_x[None, :])[0]
                assert abs(dev - v.deviation) <= 1e-12


def test_classify_examples():
    assert classify_monomial([[0.0, 2.0], [3.0, 0.0]]).kind is SubgroupKind.POSITIVE
    assert classify_monomial([[0.0, -1.0], [1.0, 0.0]]).kind is SubgroupKind.SIGN_FLIP
    assert not classify_monomial([[1.0, 1.0], [0.0, 1.0]]).monomial
    assert classify_monomial(np.eye(2)).kind is SubgroupKind.TRIVIAL
    assert classify_monomial([[0.0, 1.0], [1.0, 0.0]]).kind is SubgroupKind.PERM_ONLY
    assert classify_monomial([[0.0, -2.0], [1.0, 0.0]]).kind is SubgroupKind.FULL


def test_grid_size():
    assert sum(1 for _ in monomial_grid(2)) == 2 * 36
    assert sum(1 for _ in monomial_grid(3)) == 6 * 216


def test_scaled_tolerance_accepts_large_matrices():
    A = np.diag([1e6, 3e6, 2e5])[[2, 0, 1]]
    assert is_preserved(A, "relu").preserved


def test_random_non_monomial_rejected():
    rng = np.random.default_rng(5)
    for n in (2, 3):
        for _ in range(200):
            A = rng.uniform(-2, 2, size=(n, n))
            if abs(np.linalg.det(A)) < 1e-3:
                continue
            for sigma in ActivationKind:
                assert not is_preserved(A, sigma).preserved


def test_non_square_rejected():
    with pytest.raises(DimensionError):
        is_preserved(np.ones((2, 3)), "relu")
    with pytest.raises(DimensionError):
        classify_monomial(np.ones(3))
