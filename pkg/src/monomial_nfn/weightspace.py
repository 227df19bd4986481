"""Weight-space signatures and points.

A weight space is described by the layer count ``L``, channel counts
``(n_0, ..., n_L)`` and per-entry feature sizes ``w_i`` (weights) and ``b_i``
(biases).  Layer ``i`` (1-based, as in the usual notation) stores

* ``W[i-1]`` with shape ``[n_i, n_{i-1}, w_i]`` (row, column, feature)
* ``b[i-1]`` with shape ``[n_i, b_i]`` (row, feature)

so an FCNN is the case ``w_i = b_i = 1`` and a 1-D CNN has ``b_i = 1`` and
``w_i`` equal to the kernel size.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class ParseError(ValueError):
    """Malformed or inconsistent weight-space document."""


def _positive_ints(name, values):
    out = tuple(int(v) for v in values)
    if any(v < 1 for v in out):
        raise ValueError(f"{name} must be positive integers, got {list(values)}")
    return out


@dataclass(frozen=True)
class WeightSpaceSpec:
    channels: tuple[int, ...]
    weight_dims: tuple[int, ...]
    bias_dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "channels", _positive_ints("channels", self.channels))
        object.__setattr__(self, "weight_dims", _positive_ints("weight_dims", self.weight_dims))
        object.__setattr__(self, "bias_dims", _positive_ints("bias_dims", self.bias_dims))
        L = len(self.channels) - 1
        if L < 1:
            raise ValueError("a weight space needs at least two channel counts (L >= 1)")
        if len(self.weight_dims) != L or len(self.bias_dims) != L:
            raise ValueError(
                f"expected {L} weight and bias dims for {L} layers, got "
                f"{len(self.weight_dims)} and {len(self.bias_dims)}"
            )

    @classmethod
    def fcnn(cls, channels: Sequence[int]) -> WeightSpaceSpec:
        L = len(channels) - 1
        return cls(tuple(channels), (1,) * L, (1,) * L)

    @classmethod
    def cnn(cls, channels: Sequence[int], kernel_sizes: Sequence[int]) -> WeightSpaceSpec:
        return cls(tuple(channels), tuple(kernel_sizes), (1,) * len(kernel_sizes))

    @property
    def L(self) -> int:
        return len(self.channels) - 1

    @property
    def is_fcnn(self) -> bool:
        return all(w == 1 for w in self.weight_dims) and all(b == 1 for b in self.bias_dims)

    @property
    def is_cnn(self) -> bool:
        return all(b == 1 for b in self.bias_dims)

    def weight_shape(self, i: int) -> tuple[int, int, int]:
        """Shape of the weight tensor of layer ``i`` (1-based)."""
        return (self.channels[i], self.channels[i - 1], self.weight_dims[i - 1])

    def bias_shape(self, i: int) -> tuple[int, int]:
        return (self.channels[i], self.bias_dims[i - 1])

    def with_dims(self, weight_dims, bias_dims) -> WeightSpaceSpec:
        """Same architecture (L, channels) with different feature sizes."""
        return WeightSpaceSpec(self.channels, tuple(weight_dims), tuple(bias_dims))

    def to_dict(self) -> dict:
        return {
            "layers": self.L,
            "channels": list(self.channels),
            "weight_dim": list(self.weight_dims),
            "bias_dim": list(self.bias_dims),
        }

    @classmethod
    def from_dict(cls, doc, path="spec") -> WeightSpaceSpec:
        if not isinstance(doc, dict):
            raise ParseError(f"{path}: expected an object")
        for key in ("channels", "weight_dim", "bias_dim"):
            if key not in doc:
                raise ParseError(f"{path}: missing field {key!r}")
        try:
            spec = cls(tuple(doc["channels"]), tuple(doc["weight_dim"]), tuple(doc["bias_dim"]))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"{path}: {exc}") from exc
        if "layers" in doc and doc["layers"] != spec.L:
            raise ParseError(f"{path}.layers: says {doc['layers']} but channels give L={spec.L}")
        return spec


def dimension(spec: WeightSpaceSpec) -> int:
    """Number of real coordinates of the weight space."""
    return sum(
        w * spec.channels[i] * spec.channels[i - 1] + bd * spec.channels[i]
        for i, (w, bd) in enumerate(zip(spec.weight_dims, spec.bias_dims), start=1)
    )


@dataclass(frozen=True, eq=False)
class WeightSpacePoint:
    spec: WeightSpaceSpec
    W: tuple[np.ndarray, ...]
    b: tuple[np.ndarray, ...]

    def __post_init__(self):
        W = tuple(np.array(w, dtype=np.float64) for w in self.W)
        b = tuple(np.array(v, dtype=np.float64) for v in self.b)
        spec = self.spec
        if len(W) != spec.L or len(b) != spec.L:
            raise ValueError(f"expected {spec.L} weight and bias tensors, got {len(W)} and {len(b)}")
        for i in range(1, spec.L + 1):
            if W[i - 1].shape != spec.weight_shape(i):
                raise ValueError(
                    f"layer {i}: weight shape {W[i - 1].shape} != {spec.weight_shape(i)}"
                )
            if b[i - 1].shape != spec.bias_shape(i):
                raise ValueError(f"layer {i}: bias shape {b[i - 1].shape} != {spec.bias_shape(i)}")
        for arr in W + b:
            if not np.all(np.isfinite(arr)):
                raise ValueError("weight-space points must have finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b", b)

    def flatten(self) -> np.ndarray:
        """Coordinates in layer order: W1, b1, W2, b2, ..."""
        parts = []
        for w, v in zip(self.W, self.b):
            parts.append(w.ravel())
            parts.append(v.ravel())
        return np.concatenate(parts)

    @classmethod
    def unflatten(cls, spec: WeightSpaceSpec, flat) -> WeightSpacePoint:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != (dimension(spec),):
            raise ValueError(f"expected {dimension(spec)} coordinates, got shape {flat.shape}")
        W, b, pos = [], [], 0
        for i in range(1, spec.L + 1):
            for shape, out in ((spec.weight_shape(i), W), (spec.bias_shape(i), b)):
                size = int(np.prod(shape))
                out.append(flat[pos:pos + size].reshape(shape))
                pos += size
        return cls(spec, tuple(W), tuple(b))

    @classmethod
    def zeros(cls, spec: WeightSpaceSpec) -> WeightSpacePoint:
        return cls.unflatten(spec, np.zeros(dimension(spec)))

    def __add__(self, other):
        return WeightSpacePoint.unflatten(self.spec, self.flatten() + other.flatten())

    def __sub__(self, other):
        return WeightSpacePoint.unflatten(self.spec, self.flatten() - other.flatten())

    def __mul__(self, scalar):
        return WeightSpacePoint.unflatten(self.spec, self.flatten() * float(scalar))

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.flatten())))


def random_point(spec: WeightSpaceSpec, seed, scale: float = 1.0) -> WeightSpacePoint:
    """Entries i.i.d. uniform on ``[-scale, scale]``."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    rng = np.random.default_rng(seed)
    flat = rng.uniform(-1.0, 1.0, size=dimension(spec)) * scale
    return WeightSpacePoint.unflatten(spec, flat)


def point_to_dict(point: WeightSpacePoint) -> dict:
    return {
        "spec": point.spec.to_dict(),
        "weights": [w.tolist() for w in point.W],
        "biases": [v.tolist() for v in point.b],
    }


def point_from_dict(doc) -> WeightSpacePoint:
    if not isinstance(doc, dict):
        raise ParseError("document: expected an object")
    for key in ("spec", "weights", "biases"):
        if key not in doc:
            raise ParseError(f"document: missing field {key!r}")
    spec = WeightSpaceSpec.from_dict(doc["spec"])
    W, b = [], []
    for key, shape_of, out in (("weights", spec.weight_shape, W), ("biases", spec.bias_shape, b)):
        layers = doc[key]
        if not isinstance(layers, list) or len(layers) != spec.L:
            raise ParseError(f"{key}: expected a list of {spec.L} layers")
        for i, raw in enumerate(layers, start=1):
            path = f"{key}[{i - 1}] (layer {i})"
            try:
                arr = np.array(raw, dtype=np.float64)
            except (TypeError, ValueError) as exc:
                raise ParseError(f"{path}: {exc}") from exc
            expected = shape_of(i)
            if arr.shape != expected:
                raise ParseError(
                    f"{path}: shape {arr.shape} does not match spec {expected} "
                    f"(rows, cols{', feature' if key == 'weights' else ''})"
                    if arr.ndim == len(expected)
                    else f"{path}: expected {len(expected)}-D nested lists, got shape {arr.shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ParseError(f"{path}: non-finite entry")
            out.append(arr)
    return WeightSpacePoint(spec, tuple(W), tuple(b))


def serialize(point: WeightSpacePoint) -> bytes:
    # json writes floats with repr(), the shortest string that round-trips exactly
    return json.dumps(point_to_dict(point)).encode()


def deserialize(data: bytes | str) -> WeightSpacePoint:
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(f"document: invalid JSON ({exc})") from exc
    return point_from_dict(doc)
