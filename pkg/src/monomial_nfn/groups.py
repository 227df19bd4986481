"""Monomial matrices ``D P_pi`` and their action on vectors and weight spaces.

A :class:`MonomialElement` stores the permutation as its forward image
(``perm[j]`` is where coordinate ``j`` is sent) together with the diagonal
``d``.  As a matrix it has the single nonzero entry ``d[perm[j]]`` in column
``j``, row ``perm[j]``, so ``(g x)[i] = d[i] * x[perm^-1[i]]``.

A :class:`GroupElement` holds one monomial element per layer boundary,
indexed ``0..L`` (input channels first).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tensor import DimensionError
from .weightspace import WeightSpacePoint, WeightSpaceSpec


class SubgroupKind(str, enum.Enum):
    FULL = "full"
    POSITIVE = "positive"
    SIGN_FLIP = "signflip"
    PERM_ONLY = "permonly"
    TRIVIAL = "trivial"


@dataclass(frozen=True, eq=False)
class MonomialElement:
    diag: np.ndarray
    perm: np.ndarray

    def __post_init__(self):
        diag = np.array(self.diag, dtype=np.float64).reshape(-1)
        perm = np.array(self.perm, dtype=np.int64).reshape(-1)
        n = perm.shape[0]
        if diag.shape[0] != n:
            raise DimensionError(f"diag has {diag.shape[0]} entries, perm has {n}")
        if n < 1 or not np.array_equal(np.sort(perm), np.arange(n)):
            raise ValueError(f"perm {perm.tolist()} is not a permutation of 0..{n - 1}")
        if not np.all(np.isfinite(diag)) or np.any(diag == 0):
            raise ValueError("diagonal entries must be finite and nonzero")
        inv = np.empty_like(perm)
        inv[perm] = np.arange(n)
        for arr in (diag, perm, inv):
            arr.setflags(write=False)
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "perm", perm)
        object.__setattr__(self, "perm_inv", inv)

    @property
    def n(self) -> int:
        return self.perm.shape[0]

    @classmethod
    def identity(cls, n: int) -> MonomialElement:
        return cls(np.ones(n), np.arange(n))

    @classmethod
    def from_matrix(cls, A) -> MonomialElement:
        A = np.asarray(A, dtype=np.float64)
        nz = A != 0
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {A.shape}")
        if not (np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1)):
            raise ValueError("matrix is not monomial")
        perm = np.argmax(nz, axis=0)  # row holding the nonzero of each column
        return cls(A[perm, np.arange(A.shape[0])][np.argsort(perm)], perm)

    def to_matrix(self) -> np.ndarray:
        M = np.zeros((self.n, self.n))
        M[self.perm, np.arange(self.n)] = self.diag[self.perm]
        return M

    def is_identity(self) -> bool:
        return bool(np.all(self.diag == 1.0) and np.array_equal(self.perm, np.arange(self.n)))

    def to_dict(self) -> dict:
        return {"perm": self.perm.tolist(), "diag": self.diag.tolist()}

    @classmethod
    def from_dict(cls, doc) -> MonomialElement:
        return cls(doc["diag"], doc["perm"])


def compose(g1: MonomialElement, g2: MonomialElement) -> MonomialElement:
    """Matrix product ``g1 @ g2``: ``(D1 P1)(D2 P2) = (D1 * P1 D2 P1^-1)(P1 P2)``."""
    if g1.n != g2.n:
        raise DimensionError(f"cannot compose elements of sizes {g1.n} and {g2.n}")
    return MonomialElement(g1.diag * g2.diag[g1.perm_inv], g1.perm[g2.perm])


def inverse(g: MonomialElement) -> MonomialElement:
    """``(D P)^-1 = (P^-1 D^-1 P) P^-1``."""
    return MonomialElement(1.0 / g.diag[g.perm], g.perm_inv)


def act_vector(g: MonomialElement, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != g.n:
        raise DimensionError(f"vector of length {x.shape[-1]} vs element of size {g.n}")
    return g.diag * x[..., g.perm_inv]


@dataclass(frozen=True, eq=False)
class GroupElement:
    """One monomial element per layer boundary, ``layers[i]`` acting on channel ``i``."""

    layers: tuple[MonomialElement, ...]

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(g.n for g in self.layers)

    @classmethod
    def identity(cls, sizes: Sequence[int]) -> GroupElement:
        return cls(tuple(MonomialElement.identity(n) for n in sizes))

    def compose(self, other: GroupElement) -> GroupElement:
        if self.sizes != other.sizes:
            raise DimensionError(f"size mismatch {self.sizes} vs {other.sizes}")
        return GroupElement(tuple(compose(a, b) for a, b in zip(self.layers, other.layers)))

    def inverse(self) -> GroupElement:
        return GroupElement(tuple(inverse(g) for g in self.layers))

    def kappa(self) -> float:
        """Scaling condition number ``max |d| / min |d|`` over all layers."""
        mags = np.abs(np.concatenate([g.diag for g in self.layers]))
        return float(mags.max() / mags.min())

    def to_dict(self) -> dict:
        return {"layers": [g.to_dict() for g in self.layers]}

    @classmethod
    def from_dict(cls, doc) -> GroupElement:
        return cls(tuple(MonomialElement.from_dict(d) for d in doc["layers"]))

    def describe(self) -> str:
        """Human-readable listing in the conventional order g^(L), ..., g^(0)."""
        parts = []
        for i in reversed(range(len(self.layers))):
            g = self.layers[i]
            parts.append(f"g^({i}): perm={g.perm.tolist()} diag={g.diag.tolist()}")
        return "\n".join(parts)


def _check_sizes(g: GroupElement, spec: WeightSpaceSpec):
    if len(g.layers) != spec.L + 1:
        raise DimensionError(f"group element has {len(g.layers)} layers, spec needs {spec.L + 1}")
    for i, (m, n) in enumerate(zip(g.sizes, spec.channels)):
        if m != n:
            raise DimensionError(f"layer {i}: group element size {m} != channel count {n}")


def act_arrays(g: GroupElement, W, b):
    """Group action on raw weight/bias arrays; leading batch axes are allowed.

    ``W[i-1]`` has trailing shape ``[n_i, n_{i-1}, w_i]`` and ``b[i-1]``
    trailing shape ``[n_i, b_i]``.
    """
    W_out, b_out = [], []
    for i in range(1, len(g.layers)):
        out_g, in_g = g.layers[i], g.layers[i - 1]
        w = np.asarray(W[i - 1])
        w = w[..., out_g.perm_inv, :, :][..., :, in_g.perm_inv, :]
        ratio = out_g.diag[:, None] / in_g.diag[None, :]
        W_out.append(w * ratio[:, :, None])
        v = np.asarray(b[i - 1])[..., out_g.perm_inv, :]
        b_out.append(v * out_g.diag[:, None])
    return W_out, b_out


def act_weights(g: GroupElement, U: WeightSpacePoint) -> WeightSpacePoint:
    """``(gW)^(i) = g^(i) W^(i) (g^(i-1))^-1`` and ``(gb)^(i) = g^(i) b^(i)``,
    applied uniformly to every feature slot of an entry."""
    _check_sizes(g, U.spec)
    W, b = act_arrays(g, U.W, U.b)
    return WeightSpacePoint(U.spec, tuple(W), tuple(b))


def sample_monomial(kind: SubgroupKind, n: int, rng: np.random.Generator,
                    scale_range=(0.5, 2.0), log_uniform: bool = False) -> MonomialElement:
    kind = SubgroupKind(kind)
    if kind is SubgroupKind.TRIVIAL:
        return MonomialElement.identity(n)
    perm = rng.permutation(n)
    if kind is SubgroupKind.PERM_ONLY:
        return MonomialElement(np.ones(n), perm)
    if kind is SubgroupKind.SIGN_FLIP:
        return MonomialElement(rng.choice([-1.0, 1.0], size=n), perm)
    lo, hi = (float(v) for v in scale_range)
    if not 0 < lo <= hi:
        raise ValueError(f"scale range must satisfy 0 < lo <= hi, got [{lo}, {hi}]")
    if log_uniform:
        mags = np.exp(rng.uniform(np.log(lo), np.log(hi), size=n))
    else:
        mags = rng.uniform(lo, hi, size=n)
    if kind is SubgroupKind.FULL:
        mags = mags * rng.choice([-1.0, 1.0], size=n)
    return MonomialElement(mags, perm)


def sample(kind: SubgroupKind, sizes: Sequence[int], seed, scale_range=(0.5, 2.0),
           boundary_identity: bool = True, log_uniform: bool = False) -> GroupElement:
    """Random group element with every layer drawn from ``kind``.

    With ``boundary_identity`` the input (0) and output (L) layers are the
    identity, which is the symmetry subgroup of an FCNN/CNN.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    last = len(sizes) - 1
    layers = []
    for i, n in enumerate(sizes):
        if boundary_identity and i in (0, last):
            layers.append(MonomialElement.identity(n))
        else:
            layers.append(sample_monomial(kind, n, rng, scale_range, log_uniform))
    return GroupElement(tuple(layers))


def satisfies_kind(g: MonomialElement, kind: SubgroupKind) -> bool:
    kind = SubgroupKind(kind)
    if kind is SubgroupKind.FULL:
        return True
    if kind is SubgroupKind.POSITIVE:
        return bool(np.all(g.diag > 0))
    if kind is SubgroupKind.SIGN_FLIP:
        return bool(np.all(np.abs(g.diag) == 1.0))
    if kind is SubgroupKind.PERM_ONLY:
        return bool(np.all(g.diag == 1.0))
    return g.is_identity()
