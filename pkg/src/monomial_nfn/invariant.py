"""Invariant head ``I = MLP o pool o alpha``.

``alpha`` acts on every weight/bias entry vector and removes the scaling
(or sign) part of the symmetry; pooling over the permutable axes removes
the permutation part; the MLP adjusts the output size.

alpha sharing: an index that lives in a hidden layer is shared (its alpha
does not depend on it), an index in the input or output layer keeps its
own alpha.  For ``L >= 2`` this gives one slot per column of layer 1, one
slot per hidden weight/bias block, one slot per row of layer ``L`` and one
per output bias.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .groups import SubgroupKind
from .tensor import DimensionError
from .weightspace import WeightSpacePoint, WeightSpaceSpec


class AlphaKind(str, enum.Enum):
    NORMALIZED_SQUARES = "normalized_squares"
    ABS_VALUE = "abs_value"


class PoolMode(str, enum.Enum):
    SUM = "sum"
    MEAN = "mean"


def normalized_squares(x) -> np.ndarray:
    """``x_i^2 / sum_j x_j^2`` along the last axis, with ``alpha(0) = 0``."""
    x = np.asarray(x, dtype=np.float64)
    # rescale first so squaring neither overflows nor underflows
    peak = np.max(np.abs(x), axis=-1, keepdims=True)
    safe = np.where(peak > 0, peak, 1.0)
    sq = np.square(x / safe)
    total = np.sum(sq, axis=-1, keepdims=True)
    return np.where(total > 0, sq / np.where(total > 0, total, 1.0), 0.0)


def abs_value(x) -> np.ndarray:
    return np.abs(np.asarray(x, dtype=np.float64))


ALPHA = {AlphaKind.NORMALIZED_SQUARES: normalized_squares, AlphaKind.ABS_VALUE: abs_value}


def alpha_allowed(family: SubgroupKind, kind: AlphaKind) -> bool:
    """Positive scaling needs degree-zero homogeneity, sign flips need evenness."""
    family, kind = SubgroupKind(family), AlphaKind(kind)
    if family is SubgroupKind.POSITIVE:
        return kind is AlphaKind.NORMALIZED_SQUARES
    return True


def _weight_shared(spec: WeightSpaceSpec, i: int) -> tuple[bool, bool]:
    """Whether the row / column index of layer ``i`` weights is permutable."""
    return i < spec.L, i - 1 > 0


def beta_slot_shapes(spec: WeightSpaceSpec) -> dict:
    """Shape ``[slots..., f, f]`` of the per-slot affine beta matrices for every block."""
    shapes = {}
    for i in range(1, spec.L + 1):
        rows_shared, cols_shared = _weight_shared(spec, i)
        n_out, n_in, w = spec.weight_shape(i)
        slots = (1 if rows_shared else n_out, 1 if cols_shared else n_in)
        shapes[("W", i)] = slots + (w,)
        shapes[("b", i)] = (1 if rows_shared else n_out, spec.bias_dims[i - 1])
    return shapes


@dataclass(eq=False)
class MLP:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def init(cls, in_dim: int, widths, out_dim: int, seed) -> MLP:
        """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` initialisation."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        dims = [in_dim, *widths, out_dim]
        weights, biases = [], []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(rng.uniform(-bound, bound, size=fan_out))
        return cls(weights, biases)

    @classmethod
    def identity(cls, dim: int) -> MLP:
        return cls([np.eye(dim)], [np.zeros(dim)])

    def __call__(self, x):
        h = np.asarray(x, dtype=np.float64)
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if k < len(self.weights) - 1:
                h = np.maximum(h, 0.0)
        return h


@dataclass(eq=False)
class InvariantPipelineConfig:
    """``family`` is the diagonal subgroup the head must kill.

    ``beta`` optionally maps ``("W", i)`` / ``("b", i)`` to a pair
    ``(A, c)`` of per-slot affine maps with shapes ``[slots..., f, f]`` and
    ``[slots..., f]`` (see :func:`beta_slot_shapes`) applied after ``alpha``.
    """

    spec: WeightSpaceSpec
    family: SubgroupKind = SubgroupKind.POSITIVE
    alpha: AlphaKind = AlphaKind.NORMALIZED_SQUARES
    pool: PoolMode = PoolMode.MEAN
    mlp: MLP | None = None
    beta: dict | None = None
    ordering_version: int = field(default=1)

    def __post_init__(self):
        self.family = SubgroupKind(self.family)
        self.alpha = AlphaKind(self.alpha)
        self.pool = PoolMode(self.pool)
        if self.family not in (SubgroupKind.POSITIVE, SubgroupKind.SIGN_FLIP):
            raise ValueError(f"family must be positive or signflip, got {self.family.value}")
        if not alpha_allowed(self.family, self.alpha):
            raise ValueError(
                f"alpha {self.alpha.value} is not positively homogeneous of degree zero"
            )
        if self.beta is not None:
            shapes = beta_slot_shapes(self.spec)
            for key, (A, c) in self.beta.items():
                expected = shapes[key]
                if np.shape(A) != expected + expected[-1:] or np.shape(c) != expected:
                    raise DimensionError(f"beta block {key}: wrong shape")

    def pooled_dim(self) -> int:
        return pooled_dim(self.spec)


def init_beta(spec: WeightSpaceSpec, seed, noise: float = 0.1) -> dict:
    """Per-slot affine maps near the identity."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    beta = {}
    for key, shape in beta_slot_shapes(spec).items():
        f = shape[-1]
        A = np.broadcast_to(np.eye(f), shape + (f,)) + noise * rng.uniform(-1, 1, shape + (f,))
        beta[key] = (A, noise * rng.uniform(-1, 1, shape))
    return beta


def alpha_arrays(cfg: InvariantPipelineConfig, W, b):
    fn = ALPHA[cfg.alpha]
    W_out, b_out = [], []
    for i in range(1, cfg.spec.L + 1):
        w = fn(W[i - 1])
        v = fn(b[i - 1])
        if cfg.beta is not None:
            A, c = cfg.beta[("W", i)]
            w = np.einsum("jkab,...jkb->...jka", A, w) + c
            A, c = cfg.beta[("b", i)]
            v = np.einsum("jab,...jb->...ja", A, v) + c
        W_out.append(w)
        b_out.append(v)
    return W_out, b_out


def apply_alpha_stage(cfg: InvariantPipelineConfig, U: WeightSpacePoint) -> WeightSpacePoint:
    if U.spec != cfg.spec:
        raise DimensionError(f"point spec {U.spec} does not match config spec {cfg.spec}")
    W, b = alpha_arrays(cfg, U.W, U.b)
    return WeightSpacePoint(U.spec, tuple(W), tuple(b))


def _layer_order(L: int) -> tuple[list[int], list[int]]:
    weights = list(dict.fromkeys([1, L, *range(2, L)]))
    biases = list(dict.fromkeys([L, *range(1, L)]))
    return weights, biases


def pooled_dim(spec: WeightSpaceSpec) -> int:
    total = 0
    for i in range(1, spec.L + 1):
        rows_shared, cols_shared = _weight_shared(spec, i)
        n_out, n_in, w = spec.weight_shape(i)
        total += w * (1 if rows_shared else n_out) * (1 if cols_shared else n_in)
        total += spec.bias_dims[i - 1] * (1 if rows_shared else n_out)
    return total


def pool_arrays(spec: WeightSpaceSpec, W, b, mode=PoolMode.MEAN) -> np.ndarray:
    """Reduce over permutable axes; blocks in the order W1, WL, W2..W(L-1), bL, b1..b(L-1)."""
    reduce = np.mean if PoolMode(mode) is PoolMode.MEAN else np.sum
    w_order, b_order = _layer_order(spec.L)
    parts = []
    for i in w_order:
        rows_shared, cols_shared = _weight_shared(spec, i)
        w = np.asarray(W[i - 1])
        axes = tuple(ax for ax, shared in ((-3, rows_shared), (-2, cols_shared)) if shared)
        if axes:
            w = reduce(w, axis=axes)
        parts.append(w.reshape(w.shape[: w.ndim - (3 - len(axes))] + (-1,)))
    for i in b_order:
        rows_shared, _ = _weight_shared(spec, i)
        v = np.asarray(b[i - 1])
        if rows_shared:
            v = reduce(v, axis=-2)
            parts.append(v)
        else:
            parts.append(v.reshape(v.shape[:-2] + (-1,)))
    return np.concatenate(parts, axis=-1)


def pool_stage(cfg: InvariantPipelineConfig, U: WeightSpacePoint) -> np.ndarray:
    return pool_arrays(cfg.spec, U.W, U.b, cfg.pool)


def invariant_arrays(cfg: InvariantPipelineConfig, W, b) -> np.ndarray:
    W2, b2 = alpha_arrays(cfg, W, b)
    pooled = pool_arrays(cfg.spec, W2, b2, cfg.pool)
    return pooled if cfg.mlp is None else cfg.mlp(pooled)


def apply_invariant(cfg: InvariantPipelineConfig, U: WeightSpacePoint) -> np.ndarray:
    if U.spec != cfg.spec:
        raise DimensionError(f"point spec {U.spec} does not match config spec {cfg.spec}")
    return invariant_arrays(cfg, U.W, U.b)


def normalize_average_pool(weights) -> list[np.ndarray]:
    """Normalized squares on every entry, then the mean over both channel axes.

    Each element of ``weights`` is a ``[n_i, n_{i-1}, w_i]`` array; the
    result holds one ``w_i`` vector per layer.
    """
    out = []
    for i, w in enumerate(weights, start=1):
        w = np.asarray(w, dtype=np.float64)
        if w.ndim != 3:
            raise DimensionError(f"layer {i}: expected [rows, cols, feature], got shape {w.shape}")
        out.append(normalized_squares(w).mean(axis=(0, 1)))
    return out


def config_to_dict(cfg: InvariantPipelineConfig) -> dict:
    doc = {
        "spec": cfg.spec.to_dict(),
        "family": cfg.family.value,
        "alpha": cfg.alpha.value,
        "pool": cfg.pool.value,
        "ordering_version": cfg.ordering_version,
        "mlp": None if cfg.mlp is None else {
            "weights": [w.tolist() for w in cfg.mlp.weights],
            "biases": [v.tolist() for v in cfg.mlp.biases],
        },
        "beta": None if cfg.beta is None else [
            {"kind": k, "layer": i, "A": A.tolist(), "c": c.tolist()}
            for (k, i), (A, c) in sorted(cfg.beta.items())
        ],
    }
    return doc


def config_from_dict(doc) -> InvariantPipelineConfig:
    mlp = None
    if doc.get("mlp") is not None:
        mlp = MLP([np.array(w) for w in doc["mlp"]["weights"]],
                  [np.array(v) for v in doc["mlp"]["biases"]])
    beta = None
    if doc.get("beta") is not None:
        beta = {(e["kind"], e["layer"]): (np.array(e["A"]), np.array(e["c"])) for e in doc["beta"]}
    return InvariantPipelineConfig(
        WeightSpaceSpec.from_dict(doc["spec"]), doc["family"], doc["alpha"], doc["pool"],
        mlp, beta, doc.get("ordering_version", 1),
    )
