"""Stacked equivariant layers with an invariant head, and a toy trainer.

Between equivariant layers (and before the head) the activation of the
family is applied to every weight and bias feature entry: ReLU for the
ReLU family, tanh (or sin) for the sin/tanh family.  Both commute with the
family's diagonal subgroup, so the stack stays invariant end to end.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .equivariant import EquivariantParams, Family, SpecMismatchError, apply_arrays, random_params
from .groups import SubgroupKind, act_arrays, sample
from .invariant import (MLP, InvariantPipelineConfig, alpha_arrays, config_from_dict, config_to_dict,
                        pool_arrays, pooled_dim)
from .network import FCNN, ActivationKind, forward
from .weightspace import WeightSpacePoint, WeightSpaceSpec, random_point

PARAM_BUDGET = 2000

FAMILY_SUBGROUP = {Family.RELU: SubgroupKind.POSITIVE, Family.SINTANH: SubgroupKind.SIGN_FLIP}


class BudgetError(ValueError):
    pass


def stack_points(points) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Batch a sequence of same-spec points into arrays with a leading axis."""
    points = list(points)
    L = points[0].spec.L
    W = [np.stack([p.W[i] for p in points]) for i in range(L)]
    b = [np.stack([p.b[i] for p in points]) for i in range(L)]
    return W, b


@dataclass(eq=False)
class NfnStack:
    layers: list[EquivariantParams]
    head: InvariantPipelineConfig
    activation: ActivationKind | None = None

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise ValueError("an NFN stack needs at least one equivariant layer")
        family = self.layers[0].family
        if self.activation is None:
            self.activation = ActivationKind.RELU if family is Family.RELU else ActivationKind.TANH
        self.activation = ActivationKind(self.activation)
        if (self.activation is ActivationKind.RELU) != (family is Family.RELU):
            raise SpecMismatchError(f"activation {self.activation.value} does not match family {family.value}")
        for t, (a, b) in enumerate(zip(self.layers, self.layers[1:]), start=1):
            if a.target != b.source:
                raise SpecMismatchError(f"layer {t} target does not match layer {t + 1} source")
        for t, layer in enumerate(self.layers, start=1):
            if layer.family is not family:
                raise SpecMismatchError(f"layer {t} has family {layer.family.value}, expected {family.value}")
        if self.head.family is not FAMILY_SUBGROUP[family]:
            raise SpecMismatchError(f"head family {self.head.family.value} does not match {family.value}")
        if self.head.spec != self.layers[-1].target:
            raise SpecMismatchError("head spec does not match the last layer's target")
        if self.head.mlp is None:
            raise ValueError("the head needs an MLP")

    @property
    def family(self) -> Family:
        return self.layers[0].family

    @property
    def source(self) -> WeightSpaceSpec:
        return self.layers[0].source

    def features_arrays(self, W, b) -> np.ndarray:
        """Pooled invariant features, i.e. everything before the head MLP."""
        for layer in self.layers:
            W, b = apply_arrays(layer, W, b)
            W = [self.activation(w) for w in W]
            b = [self.activation(v) for v in b]
        return pool_arrays(self.head.spec, *alpha_arrays(self.head, W, b), self.head.pool)

    def forward_arrays(self, W, b) -> np.ndarray:
        return self.head.mlp(self.features_arrays(W, b))

    def num_layer_parameters(self) -> int:
        return sum(layer.to_vector().size for layer in self.layers)

    def __call__(self, U: WeightSpacePoint) -> np.ndarray:
        if U.spec != self.source:
            raise SpecMismatchError(f"input spec {U.spec} does not match stack source {self.source}")
        return self.forward_arrays(U.W, U.b)

    def num_parameters(self) -> int:
        return self.to_vector().size

    def to_vector(self) -> np.ndarray:
        parts = [layer.to_vector() for layer in self.layers]
        for w, v in zip(self.head.mlp.weights, self.head.mlp.biases):
            parts += [w.ravel(), v.ravel()]
        return np.concatenate(parts)

    def with_vector(self, theta, validate: bool = True) -> NfnStack:
        theta = np.asarray(theta, dtype=np.float64)
        pos, layers = 0, []
        for layer in self.layers:
            n = layer.to_vector().size
            layers.append(layer.with_vector(theta[pos:pos + n], validate))
            pos += n
        weights, biases = [], []
        for w, v in zip(self.head.mlp.weights, self.head.mlp.biases):
            weights.append(theta[pos:pos + w.size].reshape(w.shape))
            pos += w.size
            biases.append(theta[pos:pos + v.size])
            pos += v.size
        if pos != theta.size:
            raise ValueError(f"expected {pos} parameters, got {theta.size}")
        h = self.head
        head = InvariantPipelineConfig(h.spec, h.family, h.alpha, h.pool, MLP(weights, biases),
                                       h.beta, h.ordering_version)
        if not validate:
            out = object.__new__(NfnStack)
            out.layers, out.head, out.activation = layers, head, self.activation
            return out
        return NfnStack(layers, head, self.activation)

    def to_dict(self) -> dict:
        return {
            "activation": self.activation.value,
            "layers": [layer.to_dict() for layer in self.layers],
            "head": config_to_dict(self.head),
        }

    @classmethod
    def from_dict(cls, doc) -> NfnStack:
        return cls([EquivariantParams.from_dict(d) for d in doc["layers"]],
                   config_from_dict(doc["head"]), doc.get("activation"))


def build_stack(spec: WeightSpaceSpec, family, hidden, mlp_widths, out_dim: int, seed,
                alpha=None) -> NfnStack:
    """Random stack whose t-th layer maps to feature sizes ``hidden[t] = (w', b')``."""
    family = Family(family)
    rng = np.random.default_rng(seed)
    layers, src = [], spec
    for wd, bd in hidden:
        tgt = src.with_dims([wd] * src.L, [bd] * src.L)
        layers.append(random_params(src, tgt, family, rng))
        src = tgt
    if alpha is None:
        alpha = "normalized_squares" if family is Family.RELU else "abs_value"
    head = InvariantPipelineConfig(src, FAMILY_SUBGROUP[family], alpha,
                                   mlp=MLP.init(pooled_dim(src), mlp_widths, out_dim, rng))
    return NfnStack(layers, head)


@dataclass
class ToyConfig:
    channels: tuple = (2, 3, 3, 1)
    hidden: tuple = ((2, 2),)
    mlp_widths: tuple = (8,)
    n_train: int = 48
    n_test: int = 16
    steps: int = 500
    lr: float = 0.1
    weight_scale: float = 1.0
    augment_range: tuple = (0.5, 2.0)
    seed: int = 0

    @classmethod
    def from_dict(cls, doc) -> ToyConfig:
        known = {k: v for k, v in doc.items() if k in cls.__dataclass_fields__}
        unknown = sorted(set(doc) - set(known))
        if unknown:
            raise ValueError(f"unknown train-toy config keys {unknown}")
        for key in ("channels", "mlp_widths", "augment_range"):
            if key in known:
                known[key] = tuple(known[key])
        if "hidden" in known:
            known["hidden"] = tuple(tuple(h) for h in known["hidden"])
        return cls(**known)


@dataclass
class ToyDataset:
    probe: np.ndarray
    train: list[WeightSpacePoint]
    test: list[WeightSpacePoint]
    y_train: np.ndarray
    y_test: np.ndarray


def toy_dataset(cfg: ToyConfig) -> ToyDataset:
    """Random FCNN weights with target ``f(x0; U)`` under ReLU (an invariant of U)."""
    spec = WeightSpaceSpec.fcnn(cfg.channels)
    rng = np.random.default_rng(cfg.seed)
    probe = rng.uniform(-1.0, 1.0, size=spec.channels[0])
    points = [random_point(spec, rng, cfg.weight_scale) for _ in range(cfg.n_train + cfg.n_test)]
    y = np.array([forward(U, FCNN(), ActivationKind.RELU, probe)[0] for U in points])
    return ToyDataset(probe, points[:cfg.n_train], points[cfg.n_train:],
                      y[:cfg.n_train], y[cfg.n_train:])


def fd_gradient(loss, theta, rel_step: float = 1e-4, coords=None, out=None) -> np.ndarray:
    """Central differences with step ``h_i = rel_step * (1 + |theta_i|)``."""
    grad = np.empty_like(theta) if out is None else out
    for i in (range(theta.size) if coords is None else coords):
        h = rel_step * (1.0 + abs(theta[i]))
        up, down = theta.copy(), theta.copy()
        up[i] += h
        down[i] -= h
        grad[i] = (loss(up) - loss(down)) / (2.0 * h)
    return grad


@dataclass
class TrainResult:
    stack: NfnStack
    losses: list[float]
    status: str
    initial_loss: float
    final_loss: float
    test_mse: float
    augmented_max_rel_dev: float
    num_parameters: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "num_parameters": self.num_parameters,
            "initial_loss": self.initial_loss,
            "final_loss": self.final_loss,
            "loss_ratio": self.final_loss / self.initial_loss if self.initial_loss else None,
            "test_mse": self.test_mse,
            "augmented_max_rel_dev": self.augmented_max_rel_dev,
            "losses": self.losses,
            **self.extra,
        }


def train_toy(cfg: ToyConfig, log=None) -> TrainResult:
    data = toy_dataset(cfg)
    spec = data.train[0].spec
    stack = build_stack(spec, Family.RELU, cfg.hidden, cfg.mlp_widths, 1, cfg.seed + 1)
    n_params = stack.num_parameters()
    if n_params > PARAM_BUDGET:
        raise BudgetError(f"stack has {n_params} parameters, budget is {PARAM_BUDGET}")
    W, b = stack_points(data.train)

    def loss(theta):
        # divergence is detected from the returned value, not from warnings
        with np.errstate(over="ignore", invalid="ignore"):
            pred = stack.with_vector(theta, validate=False).forward_arrays(W, b)[:, 0]
            return float(np.mean((pred - data.y_train) ** 2))

    n_layer = stack.num_layer_parameters()

    def gradient(theta):
        grad = fd_gradient(loss, theta, coords=range(n_layer))
        # head coordinates leave the pooled features untouched
        features = stack.with_vector(theta, validate=False).features_arrays(W, b)

        def head_loss(t):
            with np.errstate(over="ignore", invalid="ignore"):
                pred = stack.with_vector(t, validate=False).head.mlp(features)[:, 0]
                return float(np.mean((pred - data.y_train) ** 2))

        return fd_gradient(head_loss, theta, coords=range(n_layer, theta.size), out=grad)

    theta = stack.to_vector()
    current = loss(theta)
    losses = [current]
    status = "ok"
    for step in range(cfg.steps):
        candidate = theta - cfg.lr * gradient(theta)
        value = loss(candidate) if np.all(np.isfinite(candidate)) else math.nan
        if not math.isfinite(value):
            status = f"aborted: non-finite loss at step {step + 1}"
            break
        theta, current = candidate, value
        losses.append(current)
        if log is not None and (step + 1) % 50 == 0:
            log(f"step {step + 1}: loss {current:.6g}")

    trained = stack.with_vector(theta)
    Wt, bt = stack_points(data.test)
    pred = trained.forward_arrays(Wt, bt)[:, 0]
    test_mse = float(np.mean((pred - data.y_test) ** 2))

    rng = np.random.default_rng(cfg.seed + 2)
    worst = 0.0
    for k, U in enumerate(data.test):
        g = sample(SubgroupKind.POSITIVE, spec.channels, rng, cfg.augment_range)
        Wg, bg = act_arrays(g, U.W, U.b)
        ref = pred[k]
        dev = abs(trained.forward_arrays(Wg, bg)[0] - ref)
        worst = max(worst, dev / max(1.0, abs(ref)))
    return TrainResult(trained, losses, status, losses[0], losses[-1], test_mse,
                       float(worst), n_params, {"config": asdict(cfg)})
