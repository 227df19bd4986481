"""An equivariant linear layer on weight space, its parameter count, and a brute-force check of that count."""

import numpy as np

from monomial_nfn.completeness import completeness_dimension
from monomial_nfn.equivariant import apply, baseline_hnp_count, baseline_np_count, param_count, random_params
from monomial_nfn.groups import act_weights, sample
from monomial_nfn.weightspace import WeightSpaceSpec, random_point


def main():
    source = WeightSpaceSpec((2, 3, 4, 1), (1, 1, 1), (1, 1, 1))
    target = source.with_dims((2, 2, 2), (3, 3, 3))
    for family, sub in (("relu", "positive"), ("sintanh", "signflip")):
        E = random_params(source, target, family, 0)
        U = random_point(source, 1)
        g = sample(sub, source.channels, 2, (0.5, 2.0))
        dev = np.max(np.abs(apply(E, act_weights(g, U)).flatten() - act_weights(g, apply(E, U)).flatten()))
        print(f"{family}: {E.num_parameters()} parameters, |E(gU) - gE(U)| = {dev:.2e}")

    tiny = WeightSpaceSpec.fcnn((1, 2, 2, 1))
    for family in ("relu", "sintanh"):
        print(f"{family} on (1,2,2,1): closed form {param_count(tiny, tiny, family)}, "
              f"solved from constraints {completeness_dimension(tiny, tiny, family)}")

    print("depth  ours  hidden-perm baseline  all-perm baseline")
    for L in (4, 8, 12, 16):
        s = WeightSpaceSpec.fcnn((4,) * (L + 1))
        print(f"{L:5d} {param_count(s, s, 'relu'):5d} {baseline_hnp_count(s, s):21d} {baseline_np_count(s, s):18d}")


if __name__ == "__main__":
    main()
