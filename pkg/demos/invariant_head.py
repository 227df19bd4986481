"""Normalize-then-pool features that do not change under scaling, sign flips or neuron permutations."""

import numpy as np

from monomial_nfn.groups import act_weights, sample
from monomial_nfn.invariant import MLP, InvariantPipelineConfig, apply_invariant, normalize_average_pool, pooled_dim
from monomial_nfn.weightspace import WeightSpaceSpec, random_point


def main():
    layers = [
        [[[1, 0, 1]], [[2, 3, 1]]],
        [[[2, 1], [2, 3]], [[2, 3], [0, -1]], [[-1, 1], [0, -1]]],
        [[[-1, 1, 0], [0, 0, 1], [-1, 0, 2]]],
    ]
    for i, p in enumerate(normalize_average_pool([np.array(w, dtype=float) for w in layers]), start=1):
        print(f"layer {i} pooled: {np.round(p, 6)} (sum {p.sum():.3f})")

    spec = WeightSpaceSpec((3, 4, 4, 2), (2, 2, 2), (1, 1, 1))
    head = InvariantPipelineConfig(spec, "positive", "normalized_squares", mlp=MLP.init(pooled_dim(spec), [16], 3, 0))
    U = random_point(spec, 1)
    g = sample("positive", spec.channels, 2, (1.0, 1e6), log_uniform=True)
    print("I(U)  =", apply_invariant(head, U))
    print("I(gU) =", apply_invariant(head, act_weights(g, U)), f"with kappa(g) = {g.kappa():.1e}")


if __name__ == "__main__":
    main()
