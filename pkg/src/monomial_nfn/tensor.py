"""Dense float64 array helpers shared by the rest of the package.

Arrays are plain ``numpy.ndarray`` objects in row-major order.  The
functions here add the shape checks and error messages the higher level
modules rely on.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class DimensionError(ValueError):
    """Raised when array shapes do not conform."""


_ELEMENTWISE = {
    "relu": lambda t: np.maximum(t, 0.0),
    "sin": np.sin,
    "tanh": np.tanh,
    "abs": np.abs,
    "square": np.square,
}


def as_tensor(data, shape=None) -> np.ndarray:
    t = np.asarray(data, dtype=np.float64)
    if shape is not None and t.shape != tuple(shape):
        raise DimensionError(f"expected shape {tuple(shape)}, got {t.shape}")
    if any(d < 1 for d in t.shape):
        raise DimensionError(f"every dimension must be >= 1, got {t.shape}")
    return t


def matmul(a, b) -> np.ndarray:
    """Matrix (or matrix-vector) product with a descriptive shape check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim not in (1, 2) or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def conv1d_valid(kernel, signal) -> np.ndarray:
    """Valid (unpadded) 1-D correlation: ``y[i] = sum_j kernel[j] * signal[i + j]``."""
    kernel = np.asarray(kernel, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    if kernel.ndim != 1 or signal.ndim != 1:
        raise DimensionError(
            f"conv1d_valid expects 1-D arrays, got {kernel.shape} and {signal.shape}"
        )
    m, n = kernel.shape[0], signal.shape[0]
    if m < 1 or n < m:
        raise DimensionError(f"signal length {n} is shorter than kernel length {m}")
    return sliding_window_view(signal, m) @ kernel


def conv1d_channels(weight, signal) -> np.ndarray:
    """Multi-channel valid convolution.

    ``weight`` has shape ``[n_out, n_in, m]`` and ``signal`` ``[..., n_in, n]``;
    output channel ``j`` is ``sum_k conv1d_valid(weight[j, k], signal[k])``.
    """
    weight = np.asarray(weight, dtype=np.float64)
    signal = np.asarray(signal, dtype=np.float64)
    m = weight.shape[-1]
    n = signal.shape[-1]
    if signal.shape[-2] != weight.shape[1]:
        raise DimensionError(
            f"signal has {signal.shape[-2]} channels, kernel expects {weight.shape[1]}"
        )
    if n < m:
        raise DimensionError(f"signal length {n} is shorter than kernel length {m}")
    windows = sliding_window_view(signal, m, axis=-1)  # [..., n_in, n-m+1, m]
    return np.einsum("jkm,...kim->...ji", weight, windows)


def elementwise(op: str, t) -> np.ndarray:
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}; choose from {sorted(_ELEMENTWISE)}")
    return fn(np.asarray(t, dtype=np.float64))
