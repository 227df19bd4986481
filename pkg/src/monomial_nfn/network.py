"""Forward evaluation of the FCNNs and 1-D CNNs described by a weight-space point."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass

import numpy as np

from .groups import SubgroupKind, act_weights, sample
from .tensor import DimensionError, conv1d_channels, elementwise
from .weightspace import WeightSpacePoint


class ActivationKind(str, enum.Enum):
    RELU = "relu"
    SIN = "sin"
    TANH = "tanh"

    def __call__(self, x):
        return elementwise(self.value, x)

    @property
    def symmetry(self) -> SubgroupKind:
        """Monomial subgroup commuting with this activation."""
        return SubgroupKind.POSITIVE if self is ActivationKind.RELU else SubgroupKind.SIGN_FLIP


@dataclass(frozen=True)
class FCNN:
    pass


@dataclass(frozen=True)
class CNN:
    input_len: int
    # the network equation wraps the output in sigma while the invariance
    # computation omits it; both are supported, default follows the latter
    outer_activation: bool = False


NetworkKind = FCNN | CNN


def _check_kind(U: WeightSpacePoint, kind):
    spec = U.spec
    if isinstance(kind, FCNN):
        if not spec.is_fcnn:
            raise DimensionError("FCNN evaluation needs weight_dim = bias_dim = 1 on every layer")
    elif isinstance(kind, CNN):
        if not spec.is_cnn:
            raise DimensionError("CNN evaluation needs bias_dim = 1 on every layer")
        length = kind.input_len
        for i, w in enumerate(spec.weight_dims, start=1):
            length -= w - 1
            if length < 1:
                raise DimensionError(
                    f"layer {i}: signal of input length {kind.input_len} shrinks below 1"
                )
    else:
        raise TypeError(f"unknown network kind {kind!r}")


def forward(U: WeightSpacePoint, kind, sigma: ActivationKind, x) -> np.ndarray:
    """Evaluate the network encoded by ``U`` at ``x``.

    FCNN: ``x`` has shape ``[..., n_0]``; affine layers alternate with
    ``sigma``, which is not applied after the last layer.
    CNN: ``x`` has shape ``[..., n_0, input_len]``; each layer is a valid
    multi-channel convolution plus a per-channel bias.
    """
    _check_kind(U, kind)
    sigma = ActivationKind(sigma)
    spec = U.spec
    h = np.asarray(x, dtype=np.float64)
    if isinstance(kind, FCNN):
        if h.shape[-1] != spec.channels[0]:
            raise DimensionError(f"input has {h.shape[-1]} entries, network expects {spec.channels[0]}")
        for i in range(spec.L):
            h = h @ U.W[i][:, :, 0].T + U.b[i][:, 0]
            if i < spec.L - 1:
                h = sigma(h)
        return h
    if h.shape[-2:] != (spec.channels[0], kind.input_len):
        raise DimensionError(
            f"input shape {h.shape[-2:]} != ({spec.channels[0]}, {kind.input_len})"
        )
    for i in range(spec.L):
        h = conv1d_channels(U.W[i], h) + U.b[i][:, :1]
        if i < spec.L - 1 or kind.outer_activation:
            h = sigma(h)
    return h


@dataclass
class InvarianceReport:
    trials: int
    max_abs_dev: float
    max_rel_dev: float
    argmax_trial: int

    def to_dict(self) -> dict:
        return asdict(self)

    def merge(self, other: InvarianceReport) -> InvarianceReport:
        """Order-independent combination (ties go to the smaller trial index)."""
        if (other.max_rel_dev, -other.argmax_trial) > (self.max_rel_dev, -self.argmax_trial):
            best = other
        else:
            best = self
        return InvarianceReport(
            self.trials + other.trials,
            max(self.max_abs_dev, other.max_abs_dev),
            best.max_rel_dev,
            best.argmax_trial,
        )


def deviation(reference, candidate) -> tuple[float, float]:
    """Absolute and relative sup-norm deviation; relative uses ``max(1, |ref|_inf)``."""
    reference = np.asarray(reference)
    dev = float(np.max(np.abs(np.asarray(candidate) - reference)))
    return dev, dev / max(1.0, float(np.max(np.abs(reference))))


def random_input(U: WeightSpacePoint, kind, rng: np.random.Generator, scale: float = 1.0):
    if isinstance(kind, CNN):
        return rng.uniform(-scale, scale, size=(U.spec.channels[0], kind.input_len))
    return rng.uniform(-scale, scale, size=U.spec.channels[0])


def check_invariance(U: WeightSpacePoint, kind, sigma, subgroup, trials: int, seed: int,
                     scale_range=(0.5, 2.0), first_trial: int = 0) -> InvarianceReport:
    """Compare ``f(x; gU)`` with ``f(x; U)`` for random ``g`` and probes ``x``.

    Trial ``t`` draws from ``numpy.random.default_rng(seed + t)``.  The
    hidden layers of ``g`` are drawn from ``subgroup``; input and output
    layers stay fixed.  A subgroup that does not match ``sigma`` is allowed
    (negative control) and will usually report large deviations.
    """
    report = InvarianceReport(0, 0.0, 0.0, first_trial)
    for t in range(first_trial, first_trial + trials):
        rng = np.random.default_rng(seed + t)
        g = sample(subgroup, U.spec.channels, rng, scale_range)
        x = random_input(U, kind, rng)
        ref = forward(U, kind, sigma, x)
        abs_dev, rel_dev = deviation(ref, forward(act_weights(g, U), kind, sigma, x))
        report = report.merge(InvarianceReport(1, abs_dev, rel_dev, t))
    return report
