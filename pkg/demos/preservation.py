"""Which invertible matrices commute with ReLU, sin and tanh?"""

import numpy as np

from monomial_nfn import audits
from monomial_nfn.preservation import classify_monomial, is_preserved

CANDIDATES = {
    "positive monomial": np.array([[0.0, 2.0], [0.5, 0.0]]),
    "sign-flip monomial": np.array([[0.0, -1.0], [1.0, 0.0]]),
    "mixed monomial": np.array([[-2.0, 0.0], [0.0, 1.0]]),
    "shear": np.array([[1.0, 1.0], [0.0, 1.0]]),
}


def main():
    for name, A in CANDIDATES.items():
        kind = classify_monomial(A).kind
        verdicts = {s: is_preserved(A, s).preserved for s in ("relu", "sin", "tanh")}
        print(f"{name:20s} kind={kind.value if kind else 'not monomial':12s} {verdicts}")
    v = is_preserved(CANDIDATES["shear"], "relu")
    print("shear witness x =", np.round(v.witness_x, 3), "deviation", round(v.deviation, 4))
    for sigma in ("relu", "sin", "tanh"):
        s = audits.preservation_sweep(sigma)
        print(f"grid sweep {sigma}: {s.checked} monomials, {s.misclassified} misclassified")


if __name__ == "__main__":
    main()
