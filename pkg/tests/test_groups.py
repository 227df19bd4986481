import numpy as np
import pytest

from monomial_nfn.groups import (GroupElement, MonomialElement, SubgroupKind, act_vector, act_weights, compose,
                                 inverse, sample, sample_monomial, satisfies_kind)
from monomial_nfn.tensor import DimensionError
from monomial_nfn.weightspace import WeightSpacePoint, WeightSpaceSpec, random_point


def random_element(rng, n):
    return MonomialElement(rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n), rng.permutation(n))


def test_compose_examples():
    g = MonomialElement([2.0, 3.0], [1, 0])
    assert np.array_equal(compose(MonomialElement.identity(2), g).to_matrix(), g.to_matrix())
    sq = compose(g, g)
    assert np.array_equal(sq.diag, [6.0, 6.0]) and np.array_equal(sq.perm, [0, 1])
    assert compose(g, inverse(g)).is_identity()


def test_inverse_examples():
    assert inverse(MonomialElement.identity(3)).is_identity()
    inv = inverse(MonomialElement([2.0, 4.0], [0, 1]))
    assert np.array_equal(inv.diag, [0.5, 0.25])
    rng = np.random.default_rng(0)
    g = random_element(rng, 4)
    assert np.max(np.abs(g.to_matrix() @ inverse(g).to_matrix() - np.eye(4))) <= 1e-12


def test_act_vector_examples():
    x = np.array([10.0, 20.0, 30.0])
    assert np.array_equal(act_vector(MonomialElement.identity(3), x), x)
    cycle = MonomialElement(np.ones(3), [1, 2, 0])
    assert np.array_equal(act_vector(cycle, x), [30.0, 10.0, 20.0])
    assert np.array_equal(cycle.to_matrix() @ x, [30.0, 10.0, 20.0])
    assert np.array_equal(act_vector(MonomialElement([-1.0, 1.0], [0, 1]), [5.0, 7.0]), [-5.0, 7.0])


def test_group_axioms_against_dense_matrices():
    rng = np.random.default_rng(1)
    for _ in range(500):
        n = int(rng.integers(1, 7))
        a, b, c = (random_element(rng, n) for _ in range(3))
        assert np.array_equal(compose(a, b).to_matrix(), a.to_matrix() @ b.to_matrix())
        left, right = compose(compose(a, b), c).to_matrix(), compose(a, compose(b, c)).to_matrix()
        # three-factor products round differently depending on grouping
        assert np.array_equal(left != 0, right != 0)
        assert np.max(np.abs(left - right)) <= 1e-12 * np.max(np.abs(left))
        assert np.max(np.abs(compose(a, inverse(a)).to_matrix() - np.eye(n))) <= 1e-12
        assert np.array_equal(compose(a, MonomialElement.identity(n)).to_matrix(), a.to_matrix())
        x = rng.normal(size=n)
        assert np.allclose(act_vector(a, x), a.to_matrix() @ x, rtol=0, atol=1e-14)
        assert np.allclose(act_vector(compose(a, b), x), act_vector(a, act_vector(b, x)), rtol=1e-15, atol=0)


def test_matrix_roundtrip_and_validation():
    rng = np.random.default_rng(2)
    g = random_element(rng, 5)
    h = MonomialElement.from_matrix(g.to_matrix())
    assert np.array_equal(h.diag, g.diag) and np.array_equal(h.perm, g.perm)
    with pytest.raises(ValueError):
        MonomialElement.from_matrix([[1.0, 1.0], [0.0, 1.0]])
    with pytest.raises(ValueError):
        MonomialElement([1.0, 0.0], [0, 1])
    with pytest.raises(ValueError):
        MonomialElement([1.0, 1.0], [0, 0])
    with pytest.raises(DimensionError):
        compose(MonomialElement.identity(2), MonomialElement.identity(3))


def test_act_weights_identity_and_inverse():
    spec = WeightSpaceSpec((2, 3, 4, 1), (2, 1, 3), (1, 2, 1))
    U = random_point(spec, 0)
    assert np.array_equal(act_weights(GroupElement.identity(spec.channels), U).flatten(), U.flatten())
    rng = np.random.default_rng(3)
    for _ in range(100):
        g = sample(SubgroupKind.FULL, spec.channels, rng, (0.1, 10.0), boundary_identity=False)
        back = act_weights(g, act_weights(g.inverse(), U)).flatten()
        assert np.max(np.abs(back - U.flatten())) <= 1e-12 * U.max_abs()


def test_act_weights_scales_hidden_neuron():
    spec = WeightSpaceSpec.fcnn((1, 2, 1))
    U = WeightSpacePoint(spec, (np.array([[[1.0]], [[2.0]]]), np.array([[[3.0], [4.0]]])),
                         (np.array([[5.0], [6.0]]), np.array([[7.0]])))
    g = GroupElement((MonomialElement.identity(1), MonomialElement([2.0, 1.0], [0, 1]),
                      MonomialElement.identity(1)))
    gU = act_weights(g, U)
    assert np.array_equal(gU.W[0][:, 0, 0], [2.0, 2.0])
    assert np.array_equal(gU.W[1][0, :, 0], [1.5, 4.0])
    assert np.array_equal(gU.b[0][:, 0], [10.0, 6.0])
    assert np.array_equal(gU.b[1], U.b[1])


def test_act_weights_matches_matrix_form():
    spec = WeightSpaceSpec((2, 3, 2), (3, 2), (2, 1))
    U = random_point(spec, 4)
    g = sample(SubgroupKind.FULL, spec.channels, 5, boundary_identity=False)
    gU = act_weights(g, U)
    for i in range(1, spec.L + 1):
        out_m, in_m = g.layers[i].to_matrix(), g.layers[i - 1].to_matrix()
        for f in range(spec.weight_dims[i - 1]):
            ref = out_m @ U.W[i - 1][:, :, f] @ np.linalg.inv(in_m)
            assert np.allclose(gU.W[i - 1][:, :, f], ref, rtol=1e-13, atol=1e-13)
        assert np.allclose(gU.b[i - 1], out_m @ U.b[i - 1], rtol=1e-14, atol=0)


def test_act_weights_is_left_action():
    spec = WeightSpaceSpec((3, 4, 2, 2), (1, 2, 2), (2, 1, 1))
    rng = np.random.default_rng(6)
    for _ in range(100):
        U = random_point(spec, rng)
        g = sample(SubgroupKind.FULL, spec.channels, rng, boundary_identity=False)
        h = sample(SubgroupKind.FULL, spec.channels, rng, boundary_identity=False)
        lhs = act_weights(g.compose(h), U).flatten()
        rhs = act_weights(g, act_weights(h, U)).flatten()
        assert np.max(np.abs(lhs - rhs)) <= 1e-10 * np.max(np.abs(lhs))


def test_act_weights_size_mismatch_names_layer():
    spec = WeightSpaceSpec.fcnn((1, 2, 1))
    with pytest.raises(DimensionError, match="layer 1"):
        act_weights(GroupElement.identity((1, 3, 1)), random_point(spec, 0))


def test_sample_kinds():
    sizes = (3, 4, 5, 2)
    assert all(g.is_identity() for g in sample(SubgroupKind.TRIVIAL, sizes, 0).layers)
    g = sample(SubgroupKind.SIGN_FLIP, sizes, 1, boundary_identity=False)
    assert all(set(np.abs(m.diag)) == {1.0} for m in g.layers)
    g = sample(SubgroupKind.POSITIVE, sizes, 2, (1.0, 1e6))
    assert g.layers[0].is_identity() and g.layers[-1].is_identity()
    for m in g.layers[1:-1]:
        assert np.all((m.diag >= 1.0) & (m.diag <= 1e6))
        assert satisfies_kind(m, SubgroupKind.POSITIVE)
    with pytest.raises(ValueError):
        sample(SubgroupKind.POSITIVE, sizes, 0, (2.0, 1.0))


def test_sampled_matrices_satisfy_kind():
    rng = np.random.default_rng(7)
    for kind in SubgroupKind:
        for _ in range(50):
            m = sample_monomial(kind, int(rng.integers(1, 6)), rng, (0.1, 10.0))
            assert satisfies_kind(m, kind)
            M = m.to_matrix()
            assert np.all((M != 0).sum(axis=0) == 1) and np.all((M != 0).sum(axis=1) == 1)


def test_log_uniform_stays_in_range():
    rng = np.random.default_rng(8)
    m = sample_monomial(SubgroupKind.POSITIVE, 1000, rng, (1.0, 1e6), log_uniform=True)
    assert np.all((m.diag >= 1.0) & (m.diag <= 1e6))
    assert np.median(m.diag) < 1e4


def test_group_element_json_roundtrip():
    g = sample(SubgroupKind.FULL, (2, 3, 1), 9, boundary_identity=False)
    h = GroupElement.from_dict(g.to_dict())
    assert all(np.array_equal(a.to_matrix(), b.to_matrix()) for a, b in zip(g.layers, h.layers))
    assert set(g.to_dict()["layers"][0]) == {"perm", "diag"}
    assert g.describe().splitlines()[0].startswith("g^(2)")


def test_kappa():
    g = GroupElement((MonomialElement.identity(1), MonomialElement([0.5, -4.0], [1, 0]),
                      MonomialElement.identity(1)))
    assert g.kappa() == 8.0
