"""Which invertible matrices commute with an activation.

``is_preserved`` is a sampling decision procedure, not a proof: it evaluates
``sigma(A x) - A sigma(x)`` on random probes plus the structured probes that
separate monomial from non-monomial matrices (unit vectors, their negatives,
and two-coordinate probes ``t e_j - e_k``).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .groups import SubgroupKind
from .network import ActivationKind
from .tensor import DimensionError

PROBE_SCALES = (1.0, 10.0, 100.0)
DEFAULT_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class PreservationVerdict:
    preserved: bool
    max_deviation: float
    tolerance: float
    witness_matrix: np.ndarray | None = None
    witness_x: np.ndarray | None = None
    deviation: float | None = None

    def to_dict(self) -> dict:
        out = {
            "preserved": self.preserved,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
        }
        if not self.preserved:
            out["witness"] = {
                "matrix": self.witness_matrix.tolist(),
                "x": self.witness_x.tolist(),
                "deviation": self.deviation,
            }
        return out


def structured_probes(n: int) -> np.ndarray:
    eye = np.eye(n)
    probes = [eye, -eye]
    for t in PROBE_SCALES:
        for j in range(n):
            for k in range(n):
                if j != k:
                    probes.append((t * eye[j] - eye[k])[None, :])
    return np.concatenate(probes, axis=0)


def commutation_defect(A, sigma, X) -> np.ndarray:
    """Row-wise ``|sigma(A x) - A sigma(x)|_inf`` for each probe row of ``X``."""
    sigma = ActivationKind(sigma)
    A = np.asarray(A, dtype=np.float64)
    return np.max(np.abs(sigma(X @ A.T) - sigma(X) @ A.T), axis=1)


def is_preserved(A, sigma, trials: int = 64, seed: int = 0) -> PreservationVerdict:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    X = np.concatenate([structured_probes(n), rng.uniform(-10.0, 10.0, size=(trials, n))])
    defects = commutation_defect(A, sigma, X)
    norm = float(np.max(np.sum(np.abs(A), axis=1)))
    tol = DEFAULT_RTOL * max(norm, np.finfo(float).tiny)
    worst = int(np.argmax(defects))
    max_dev = float(defects[worst])
    if max_dev <= tol:
        return PreservationVerdict(True, max_dev, tol)
    return PreservationVerdict(False, max_dev, tol, A.copy(), X[worst].copy(), max_dev)


@dataclass(frozen=True)
class MonomialClass:
    monomial: bool
    kind: SubgroupKind | None = None


def classify_monomial(A) -> MonomialClass:
    """Exact structural classification; ``kind`` is the smallest matching subgroup."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    nz = A != 0
    if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
        return MonomialClass(False)
    values = A[nz]
    if np.array_equal(A, np.eye(A.shape[0])):
        kind = SubgroupKind.TRIVIAL
    elif np.all(values == 1.0):
        kind = SubgroupKind.PERM_ONLY
    elif np.all(np.abs(values) == 1.0):
        kind = SubgroupKind.SIGN_FLIP
    elif np.all(values > 0):
        kind = SubgroupKind.POSITIVE
    else:
        kind = SubgroupKind.FULL
    return MonomialClass(True, kind)


def monomial_grid(n: int, values=(-2.0, -1.0, -0.5, 0.5, 1.0, 2.0)):
    """Every monomial matrix whose nonzero entries are drawn from ``values``."""
    values = np.asarray(values, dtype=np.float64)
    grids = np.stack(np.meshgrid(*([values] * n), indexing="ij"), axis=-1).reshape(-1, n)
    for perm in permutations(range(n)):
        for d in grids:
            A = np.zeros((n, n))
            A[list(perm), range(n)] = d
            yield A
