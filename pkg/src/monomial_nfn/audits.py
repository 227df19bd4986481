"""Randomised property trials shared by the CLI audits and the test-suite.

Trial ``t`` of a run with seed ``s`` draws everything (spec, weights, probe,
group element) from ``numpy.random.default_rng(s + t)``, so a trial can be
replayed on its own and trials can be split across processes freely.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equivariant import Family, apply_arrays, random_params
from .groups import GroupElement, MonomialElement, SubgroupKind, act_arrays, act_weights, sample
from .invariant import MLP, InvariantPipelineConfig, init_beta, invariant_arrays, pooled_dim
from .network import CNN, FCNN, ActivationKind, deviation, forward, random_input
from .nfn import build_stack
from .preservation import classify_monomial, is_preserved, monomial_grid
from .weightspace import WeightSpaceSpec, random_point

RELU_KINDS = {SubgroupKind.TRIVIAL, SubgroupKind.PERM_ONLY, SubgroupKind.POSITIVE}
SIGN_KINDS = {SubgroupKind.TRIVIAL, SubgroupKind.PERM_ONLY, SubgroupKind.SIGN_FLIP}


def conforming(sigma, subgroup) -> bool:
    """Whether every element of ``subgroup`` commutes with ``sigma``."""
    allowed = RELU_KINDS if ActivationKind(sigma) is ActivationKind.RELU else SIGN_KINDS
    return SubgroupKind(subgroup) in allowed


@dataclass(frozen=True)
class TrialResult:
    index: int
    abs_dev: float
    rel_dev: float


def random_spec(rng: np.random.Generator, net: str = "fcnn", layers=(2, 3, 4), max_width: int = 4,
                max_dim: int = 1):
    """Random spec (and network kind) for one trial."""
    L = int(rng.choice(layers))
    channels = tuple(int(c) for c in rng.integers(1, max_width + 1, size=L + 1))
    if net == "fcnn":
        if max_dim == 1:
            return WeightSpaceSpec.fcnn(channels), FCNN()
        wd = rng.integers(1, max_dim + 1, size=L)
        bd = rng.integers(1, max_dim + 1, size=L)
        return WeightSpaceSpec(channels, tuple(wd), tuple(bd)), None
    kernels = tuple(int(k) for k in rng.integers(1, 4, size=L))
    length = sum(k - 1 for k in kernels) + int(rng.integers(1, 5))
    return WeightSpaceSpec.cnn(channels, kernels), CNN(length)


def invariance_trial(t: int, seed: int, sigma, subgroup, net: str = "fcnn",
                     scale_range=(0.1, 10.0), point=None, kind=None) -> TrialResult:
    rng = np.random.default_rng(seed + t)
    if point is None:
        spec, kind = random_spec(rng, net)
        point = random_point(spec, rng)
    g = sample(subgroup, point.spec.channels, rng, scale_range)
    x = random_input(point, kind, rng)
    ref = forward(point, kind, sigma, x)
    abs_dev, rel_dev = deviation(ref, forward(act_weights(g, point), kind, sigma, x))
    return TrialResult(t, abs_dev, rel_dev)


def _single_neuron(sizes, layer: int, j: int, value: float) -> GroupElement:
    layers = [MonomialElement.identity(n) for n in sizes]
    diag = np.ones(sizes[layer])
    diag[j] = value
    layers[layer] = MonomialElement(diag, np.arange(sizes[layer]))
    return GroupElement(tuple(layers))


def adversarial_element(point, kind, sigma, subgroup, x, rng, scale_range=(0.1, 10.0)):
    """Element of ``subgroup`` chosen to break invariance of ``sigma`` as much as possible.

    Tries a sign flip and/or the extreme scales on each hidden neuron alone,
    keeps the worst one and composes it with a random hidden permutation.
    """
    subgroup = SubgroupKind(subgroup)
    lo, hi = scale_range
    values = {SubgroupKind.SIGN_FLIP: [-1.0], SubgroupKind.POSITIVE: [hi, lo],
              SubgroupKind.FULL: [-1.0, hi, lo]}.get(subgroup, [])
    sizes = point.spec.channels
    ref = forward(point, kind, sigma, x)
    best, best_dev = GroupElement.identity(sizes), -1.0
    for layer in range(1, len(sizes) - 1):
        for j in range(sizes[layer]):
            for v in values:
                g = _single_neuron(sizes, layer, j, v)
                dev = deviation(ref, forward(act_weights(g, point), kind, sigma, x))[0]
                if dev > best_dev:
                    best, best_dev = g, dev
    return sample(SubgroupKind.PERM_ONLY, sizes, rng).compose(best)


def negative_control_trial(t: int, seed: int, sigma, subgroup, net: str = "fcnn",
                           scale_range=(0.1, 10.0)) -> TrialResult:
    rng = np.random.default_rng(seed + t)
    spec, kind = random_spec(rng, net, max_width=4)
    # at least two hidden neurons so a scaling has something to act on
    spec = WeightSpaceSpec(tuple(max(c, 2) if 0 < i < spec.L else c for i, c in enumerate(spec.channels)),
                           spec.weight_dims, spec.bias_dims)
    point = random_point(spec, rng)
    x = random_input(point, kind, rng)
    g = adversarial_element(point, kind, sigma, subgroup, x, rng, scale_range)
    ref = forward(point, kind, sigma, x)
    abs_dev, rel_dev = deviation(ref, forward(act_weights(g, point), kind, sigma, x))
    return TrialResult(t, abs_dev, rel_dev)


def family_subgroup(family) -> SubgroupKind:
    return SubgroupKind.POSITIVE if Family(family) is Family.RELU else SubgroupKind.SIGN_FLIP


def equivariance_trial(t: int, seed: int, family, scale_range=(0.5, 2.0)) -> TrialResult:
    """Deviation ``|E(gU) - g E(U)|`` relative to ``max(1, |gE(U)|) * kappa(g)``."""
    family = Family(family)
    rng = np.random.default_rng(seed + t)
    layers = (2, 3, 4) if family is Family.RELU else (3, 4)
    source, _ = random_spec(rng, "fcnn", layers, max_width=4, max_dim=3)
    L = source.L
    target = source.with_dims(rng.integers(1, 4, size=L), rng.integers(1, 4, size=L))
    params = random_params(source, target, family, rng)
    U = random_point(source, rng)
    g = sample(family_subgroup(family), source.channels, rng, scale_range)
    gW, gb = act_arrays(g, U.W, U.b)
    lhs = apply_arrays(params, gW, gb)
    rhs = act_arrays(g, *apply_arrays(params, U.W, U.b))
    flat = lambda arrs: np.concatenate([a.ravel() for part in arrs for a in part])
    ref, cand = flat(rhs), flat(lhs)
    abs_dev, rel_dev = deviation(ref, cand)
    return TrialResult(t, abs_dev, rel_dev / g.kappa())


def invariant_trial(t: int, seed: int, family, scale_range=(0.1, 10.0)) -> TrialResult:
    """Head ``MLP o pool o alpha`` (with a random beta) on ``U`` versus ``gU``."""
    family = Family(family)
    rng = np.random.default_rng(seed + t)
    spec, _ = random_spec(rng, "fcnn", (1, 2, 3, 4), max_width=4, max_dim=3)
    subgroup = family_subgroup(family)
    if family is Family.RELU:
        alpha = "normalized_squares"
    else:
        alpha = ("abs_value", "normalized_squares")[int(rng.integers(2))]
    beta = init_beta(spec, rng) if rng.random() < 0.5 else None
    mlp = MLP.init(pooled_dim(spec), [int(rng.integers(1, 9))], int(rng.integers(1, 4)), rng)
    cfg = InvariantPipelineConfig(spec, subgroup, alpha, mlp=mlp, beta=beta)
    U = random_point(spec, rng)
    g = sample(subgroup, spec.channels, rng, scale_range)
    ref = invariant_arrays(cfg, U.W, U.b)
    abs_dev, rel_dev = deviation(ref, invariant_arrays(cfg, *act_arrays(g, U.W, U.b)))
    return TrialResult(t, abs_dev, rel_dev)


def stack_trial(t: int, seed: int, family, scale_range=(0.5, 2.0)) -> TrialResult:
    """Whole NFN stack on ``U`` versus ``gU``; relative deviation divided by ``kappa(g)``."""
    family = Family(family)
    rng = np.random.default_rng(seed + t)
    layers = (2, 3) if family is Family.RELU else (3, 4)
    spec, _ = random_spec(rng, "fcnn", layers, max_width=4, max_dim=2)
    depth = int(rng.integers(1, 3))
    hidden = [tuple(int(v) for v in rng.integers(1, 4, size=2)) for _ in range(depth)]
    stack = build_stack(spec, family, hidden, [8], 2, rng)
    U = random_point(spec, rng)
    g = sample(family_subgroup(family), spec.channels, rng, scale_range)
    ref = stack(U)
    abs_dev, rel_dev = deviation(ref, stack(act_weights(g, U)))
    return TrialResult(t, abs_dev, rel_dev / g.kappa())


def expected_preserved(sigma, A) -> bool:
    cls = classify_monomial(A)
    if not cls.monomial:
        return False
    return conforming(sigma, cls.kind)


@dataclass
class PreserveSummary:
    checked: int
    misclassified: int
    witnesses: list

    def to_dict(self) -> dict:
        return {"checked": self.checked, "misclassified": self.misclassified,
                "witnesses": self.witnesses}


def preservation_sweep(sigma, sizes=(2, 3), values=(-2.0, -1.0, -0.5, 0.5, 1.0, 2.0),
                       extra_random: int = 0, seed: int = 0, max_witnesses: int = 5) -> PreserveSummary:
    """Decide every monomial on the grid (plus random dense matrices) and compare
    with the exact characterisation."""
    checked = wrong = 0
    witnesses = []
    rng = np.random.default_rng(seed)

    def candidates(n):
        yield from monomial_grid(n, values)
        for _ in range(extra_random):
            yield rng.uniform(-2.0, 2.0, size=(n, n))

    for n in sizes:
        for A in candidates(n):
            verdict = is_preserved(A, sigma, seed=seed)
            checked += 1
            if verdict.preserved != expected_preserved(sigma, A):
                wrong += 1
                if len(witnesses) < max_witnesses:
                    witnesses.append({"matrix": A.tolist(), "decided": verdict.preserved})
    return PreserveSummary(checked, wrong, witnesses)
