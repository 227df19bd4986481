"""A network's function is unchanged by weight-space symmetries that commute with its activation."""

import numpy as np

from monomial_nfn.groups import act_weights, sample
from monomial_nfn.network import FCNN, CNN, check_invariance, forward
from monomial_nfn.weightspace import WeightSpaceSpec, random_point


def main():
    spec = WeightSpaceSpec.fcnn((3, 5, 5, 2))
    U = random_point(spec, 0)
    x = np.array([0.2, -1.0, 0.7])
    g = sample("positive", spec.channels, 1, (0.1, 10.0))
    print("relu f(x)      ", forward(U, FCNN(), "relu", x))
    print("relu f_gU(x)   ", forward(act_weights(g, U), FCNN(), "relu", x))
    g = sample("signflip", spec.channels, 2)
    print("relu after flip", forward(act_weights(g, U), FCNN(), "relu", x), "(changes)")
    print("tanh f(x)      ", forward(U, FCNN(), "tanh", x))
    print("tanh after flip", forward(act_weights(g, U), FCNN(), "tanh", x))

    cnn = WeightSpaceSpec.cnn((2, 4, 1), (3, 2))
    for sigma, sub in (("relu", "positive"), ("sin", "signflip"), ("relu", "signflip")):
        r = check_invariance(random_point(cnn, 3), CNN(8), sigma, sub, 200, 0)
        print(f"CNN {sigma}/{sub}: max relative deviation over 200 trials {r.max_rel_dev:.2e}")


if __name__ == "__main__":
    main()
