"""Linear layers ``E: U -> U'`` equivariant under the hidden monomial group.

Parameters are stored per block with shared indices simply absent, so the
tie constraints between coefficients hold by construction.  For a source
spec with feature sizes ``(w_i, b_i)`` and a target with ``(w'_i, b'_i)``:

=========  ===========================  =====================================
block      shape                        role
=========  ===========================  =====================================
``P1``     ``[n0, n0, w'_1, w_1]``      ``W'1[j,k] += P1[k,q] W1[j,q]``
``Q1``     ``[n0, w'_1, b_1]``          ``W'1[j,k] += Q1[k] b1[j]``
``R1``     ``[n0, b'_1, w_1]``          ``b'1[j]  += R1[q] W1[j,q]``
``S1``     ``[b'_1, b_1]``              ``b'1[j]  += S1 b1[j]``
``Pmid``   ``[w'_i, w_i]`` per layer    ``W'i[j,k] = Pmid W_i[j,k]``
``Smid``   ``[b'_i, b_i]`` per layer    ``b'i[j]  = Smid b_i[j]``
``PL``     ``[nL, nL, w'_L, w_L]``      ``W'L[j,k] += PL[j,p] WL[p,k]``
``SL``     ``[nL, nL, b'_L, b_L]``      ``b'L[j]  += SL[j,p] bL[p]``
``TL``     ``[nL, b'_L]``               ``b'L[j]  += TL[j]``
``RLm1``   ``[nL, b'_{L-1}, w_L]``      ``b'_{L-1}[j] += RLm1[p] WL[p,j]`` (sin/tanh)
``QL``     ``[nL, w'_L, b_{L-1}]``      ``W'L[j,k] += QL[j] b_{L-1}[k]`` (sin/tanh)
=========  ===========================  =====================================

With a single layer the group acting on the weight space is trivial and the
layer is an unrestricted affine map, stored as ``dense`` and ``offset``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .weightspace import WeightSpacePoint, WeightSpaceSpec, dimension


class Family(str, enum.Enum):
    RELU = "relu"
    SINTANH = "sintanh"


class UnsupportedSpecError(ValueError):
    pass


class SpecMismatchError(ValueError):
    pass


@dataclass(eq=False)
class EquivariantParams:
    family: Family
    source: WeightSpaceSpec
    target: WeightSpaceSpec
    blocks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.family = Family(self.family)
        check_spec_pair(self.source, self.target, self.family)
        expected = block_shapes(self.source, self.target, self.family)
        blocks = {}
        for name, shape in expected.items():
            if name not in self.blocks:
                raise SpecMismatchError(f"missing parameter block {name!r}")
            value = self.blocks[name]
            if isinstance(shape, list):
                if len(value) != len(shape):
                    raise SpecMismatchError(f"block {name!r}: expected {len(shape)} layers, got {len(value)}")
                arrs = [np.array(v, dtype=np.float64) for v in value]
                for idx, (a, s) in enumerate(zip(arrs, shape)):
                    if a.shape != s:
                        raise SpecMismatchError(f"block {name}[{idx}]: shape {a.shape} != {s}")
                blocks[name] = arrs
            else:
                a = np.array(value, dtype=np.float64)
                if a.shape != shape:
                    raise SpecMismatchError(f"block {name!r}: shape {a.shape} != {shape}")
                blocks[name] = a
        extra = set(self.blocks) - set(expected)
        if extra:
            raise SpecMismatchError(f"unexpected blocks {sorted(extra)} for {self.family.value} family")
        self.blocks = blocks

    def __getitem__(self, name):
        return self.blocks[name]

    def num_parameters(self) -> int:
        return sum(
            sum(a.size for a in v) if isinstance(v, list) else v.size for v in self.blocks.values()
        )

    def to_vector(self) -> np.ndarray:
        parts = []
        for name in sorted(self.blocks):
            v = self.blocks[name]
            parts.extend(a.ravel() for a in (v if isinstance(v, list) else [v]))
        return np.concatenate(parts) if parts else np.zeros(0)

    def with_vector(self, theta, validate: bool = True) -> EquivariantParams:
        """Same layout with blocks read from ``theta`` (sorted block names).

        ``validate=False`` skips the shape checks; the layout is known to match.
        """
        theta = np.asarray(theta, dtype=np.float64)
        blocks, pos = {}, 0
        for name in sorted(self.blocks):
            v = self.blocks[name]
            out = []
            for a in (v if isinstance(v, list) else [v]):
                out.append(theta[pos:pos + a.size].reshape(a.shape))
                pos += a.size
            blocks[name] = out if isinstance(v, list) else out[0]
        if pos != theta.size:
            raise ValueError(f"expected {pos} parameters, got {theta.size}")
        if not validate:
            out = object.__new__(EquivariantParams)
            out.family, out.source, out.target, out.blocks = (
                self.family, self.source, self.target, blocks)
            return out
        return EquivariantParams(self.family, self.source, self.target, blocks)

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
            "blocks": {
                k: [a.tolist() for a in v] if isinstance(v, list) else v.tolist()
                for k, v in sorted(self.blocks.items())
            },
        }

    @classmethod
    def from_dict(cls, doc) -> EquivariantParams:
        return cls(
            Family(doc["family"]),
            WeightSpaceSpec.from_dict(doc["source"], "source"),
            WeightSpaceSpec.from_dict(doc["target"], "target"),
            dict(doc["blocks"]),
        )


def check_spec_pair(source: WeightSpaceSpec, target: WeightSpaceSpec, family) -> None:
    if source.channels != target.channels:
        raise SpecMismatchError(
            f"source channels {source.channels} and target channels {target.channels} differ"
        )
    if Family(family) is Family.SINTANH and source.L < 3:
        raise UnsupportedSpecError(
            f"the sin/tanh layer is only constructed for L >= 3, got L={source.L}"
        )


def block_shapes(source: WeightSpaceSpec, target: WeightSpaceSpec, family) -> dict:
    family = Family(family)
    check_spec_pair(source, target, family)
    n = source.channels
    L = source.L
    w, bd = source.weight_dims, source.bias_dims
    wt, bt = target.weight_dims, target.bias_dims
    if L == 1:
        return {
            "dense": (dimension(target), dimension(source)),
            "offset": (dimension(target),),
        }
    shapes = {
        "P1": (n[0], n[0], wt[0], w[0]),
        "Q1": (n[0], wt[0], bd[0]),
        "R1": (n[0], bt[0], w[0]),
        "S1": (bt[0], bd[0]),
        "Pmid": [(wt[i], w[i]) for i in range(1, L - 1)],
        "Smid": [(bt[i], bd[i]) for i in range(1, L - 1)],
        "PL": (n[L], n[L], wt[L - 1], w[L - 1]),
        "SL": (n[L], n[L], bt[L - 1], bd[L - 1]),
        "TL": (n[L], bt[L - 1]),
    }
    if family is Family.SINTANH:
        shapes["RLm1"] = (n[L], bt[L - 2], w[L - 1])
        shapes["QL"] = (n[L], wt[L - 1], bd[L - 2])
    return shapes


def _fill(shapes, make):
    return {
        name: [make(s) for s in shape] if isinstance(shape, list) else make(shape)
        for name, shape in shapes.items()
    }


def zero_params(source, target, family) -> EquivariantParams:
    return EquivariantParams(family, source, target, _fill(block_shapes(source, target, family), np.zeros))


def random_params(source, target, family, seed) -> EquivariantParams:
    """I.i.d. ``Uniform[-1, 1]`` scaled by ``1/sqrt(fan_in)`` of each block.

    The fan-in of a block is the number of input coordinates one output
    coordinate reads through it.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    shapes = block_shapes(source, target, family)

    def make(name, shape):
        if name in ("TL", "offset"):
            fan_in = 1
        elif name == "dense":
            fan_in = shape[1]
        elif name in ("P1", "PL", "SL"):
            fan_in = shape[1] * shape[3]
        elif name in ("Q1", "R1", "RLm1", "QL"):
            fan_in = shape[2] * (shape[0] if name in ("R1", "RLm1") else 1)
        else:
            fan_in = shape[-1]
        return rng.uniform(-1.0, 1.0, size=shape) / np.sqrt(fan_in)

    blocks = {
        name: [make(name, s) for s in shape] if isinstance(shape, list) else make(name, shape)
        for name, shape in shapes.items()
    }
    return EquivariantParams(family, source, target, blocks)


def identity_params(spec: WeightSpaceSpec, family=Family.RELU) -> EquivariantParams:
    """Parameters for which the layer is the identity map on ``spec``."""
    params = zero_params(spec, spec, family)
    b = params.blocks
    if spec.L == 1:
        b["dense"] = np.eye(dimension(spec))
        return params
    n0, nL = spec.channels[0], spec.channels[-1]
    for k in range(n0):
        b["P1"][k, k] = np.eye(spec.weight_dims[0])
    b["S1"] = np.eye(spec.bias_dims[0])
    b["Pmid"] = [np.eye(wd) for wd in spec.weight_dims[1:-1]]
    b["Smid"] = [np.eye(bd) for bd in spec.bias_dims[1:-1]]
    for j in range(nL):
        b["PL"][j, j] = np.eye(spec.weight_dims[-1])
        b["SL"][j, j] = np.eye(spec.bias_dims[-1])
    return params


def apply_arrays(params: EquivariantParams, W, b):
    """Apply the layer to raw arrays (leading batch axes allowed)."""
    blk = params.blocks
    L = params.source.L
    if L == 1:
        W0, b0 = np.asarray(W[0]), np.asarray(b[0])
        batch = W0.shape[:-3]
        flat = np.concatenate(
            [W0.reshape(batch + (-1,)), b0.reshape(batch + (-1,))], axis=-1
        )
        out = flat @ blk["dense"].T + blk["offset"]
        t = params.target
        nw = int(np.prod(t.weight_shape(1)))
        return (
            [out[..., :nw].reshape(batch + t.weight_shape(1))],
            [out[..., nw:].reshape(batch + t.bias_shape(1))],
        )
    W = [np.asarray(a) for a in W]
    b = [np.asarray(a) for a in b]
    W_out, b_out = [None] * L, [None] * L

    W_out[0] = (np.einsum("kqab,...jqb->...jka", blk["P1"], W[0])
                + np.einsum("kab,...jb->...jka", blk["Q1"], b[0]))
    b_out[0] = (np.einsum("qab,...jqb->...ja", blk["R1"], W[0])
                + np.einsum("ab,...jb->...ja", blk["S1"], b[0]))
    for m, i in enumerate(range(1, L - 1)):
        W_out[i] = np.einsum("ab,...jkb->...jka", blk["Pmid"][m], W[i])
        b_out[i] = np.einsum("ab,...jb->...ja", blk["Smid"][m], b[i])
    W_out[L - 1] = np.einsum("jpab,...pkb->...jka", blk["PL"], W[L - 1])
    b_out[L - 1] = np.einsum("jpab,...pb->...ja", blk["SL"], b[L - 1]) + blk["TL"]

    if params.family is Family.SINTANH:
        b_out[L - 2] = b_out[L - 2] + np.einsum("pab,...pjb->...ja", blk["RLm1"], W[L - 1])
        W_out[L - 1] = W_out[L - 1] + np.einsum("jab,...kb->...jka", blk["QL"], b[L - 2])
    return W_out, b_out


def _apply(params: EquivariantParams, U: WeightSpacePoint) -> WeightSpacePoint:
    if U.spec != params.source:
        raise SpecMismatchError(f"input spec {U.spec} does not match layer source {params.source}")
    W, b = apply_arrays(params, U.W, U.b)
    return WeightSpacePoint(params.target, tuple(W), tuple(b))


def apply_relu(params: EquivariantParams, U: WeightSpacePoint) -> WeightSpacePoint:
    if params.family is not Family.RELU:
        raise SpecMismatchError("apply_relu needs ReLU-family parameters")
    return _apply(params, U)


def apply_sintanh(params: EquivariantParams, U: WeightSpacePoint) -> WeightSpacePoint:
    if params.family is not Family.SINTANH:
        raise SpecMismatchError("apply_sintanh needs sin/tanh-family parameters")
    return _apply(params, U)


def apply(params: EquivariantParams, U: WeightSpacePoint) -> WeightSpacePoint:
    return _apply(params, U)


def param_count(source: WeightSpaceSpec, target: WeightSpaceSpec, family) -> int:
    """Closed-form number of free coefficients of the layer."""
    family = Family(family)
    check_spec_pair(source, target, family)
    n, L = source.channels, source.L
    w, bd = source.weight_dims, source.bias_dims
    wt, bt = target.weight_dims, target.bias_dims
    if L == 1:
        return dimension(target) * (dimension(source) + 1)
    count = (wt[0] * w[0] * n[0] ** 2 + wt[0] * bd[0] * n[0] + bt[0] * w[0] * n[0] + bt[0] * bd[0]
             + sum(wt[i] * w[i] + bt[i] * bd[i] for i in range(1, L - 1))
             + wt[L - 1] * w[L - 1] * n[L] ** 2 + bt[L - 1] * bd[L - 1] * n[L] ** 2
             + bt[L - 1] * n[L])
    if family is Family.SINTANH:
        count += bt[L - 2] * w[L - 1] * n[L] + wt[L - 1] * bd[L - 2] * n[L]
    return count


ASYMPTOTIC = {
    "monomial": "O(cc'(L+n0+nL))",
    "hnp": "O(cc'(L+n0+nL)^2)",
    "np": "O(cc'L^2)",
}


def _orbit_factor(layer_counts, n, fixed_layers) -> int:
    factor = 1
    for layer, occurrences in layer_counts.items():
        if layer in fixed_layers:
            factor *= n[layer] ** occurrences
        elif occurrences == 2 and n[layer] >= 2:
            factor *= 2
    return factor


def permutation_baseline_count(source: WeightSpaceSpec, target: WeightSpaceSpec,
                               fixed_layers) -> int:
    """Parameters of the most general affine layer equivariant to neuron permutations.

    Every layer outside ``fixed_layers`` carries a full symmetric group.  The
    count is the number of orbits of (output coordinate, input coordinate)
    pairs: two indices living in the same permuted layer contribute the
    patterns "equal" and "different", and an index in a fixed layer keeps its
    value.  Each orbit carries a ``c' x c`` feature block.
    """
    n, L = source.channels, source.L
    fixed = set(fixed_layers)
    entries = []  # (layers touched, feature dim) for every block of the space
    for i in range(1, L + 1):
        entries.append(((i, i - 1), source.weight_dims[i - 1], target.weight_dims[i - 1]))
        entries.append(((i,), source.bias_dims[i - 1], target.bias_dims[i - 1]))
    total = 0
    for out_layers, _, out_dim in entries:
        # the affine offset is an orbit of output indices alone
        counts = {}
        for layer in out_layers:
            counts[layer] = counts.get(layer, 0) + 1
        total += out_dim * _orbit_factor(counts, n, fixed)
        for in_layers, in_dim, _ in entries:
            counts = {}
            for layer in out_layers + in_layers:
                counts[layer] = counts.get(layer, 0) + 1
            total += out_dim * in_dim * _orbit_factor(counts, n, fixed)
    return total


def baseline_hnp_count(source, target) -> int:
    """Hidden-neuron permutations only (input/output channels fixed)."""
    return permutation_baseline_count(source, target, {0, source.L})


def baseline_np_count(source, target) -> int:
    """Permutations on every layer, input and output included."""
    return permutation_baseline_count(source, target, set())


def materialize_dense(params: EquivariantParams):
    """Dense ``(A, c)`` with ``E(U).flatten() == A @ U.flatten() + c``.

    Built column by column from the layer itself; used to inspect the
    coefficient tables and to compare against the brute-force oracle.
    """
    src = params.source
    dim = dimension(src)
    zero = WeightSpacePoint.zeros(src)
    c = _apply(params, zero).flatten()
    basis = np.eye(dim)
    W, b, pos = [], [], 0
    for i in range(1, src.L + 1):
        for shape, out in ((src.weight_shape(i), W), (src.bias_shape(i), b)):
            size = int(np.prod(shape))
            out.append(basis[:, pos:pos + size].reshape((dim,) + shape))
            pos += size
    W_out, b_out = apply_arrays(params, W, b)
    cols = np.concatenate(
        [np.concatenate([w.reshape(dim, -1), v.reshape(dim, -1)], axis=1)
         for w, v in zip(W_out, b_out)], axis=1,
    )
    return cols.T - c[:, None], c


def coefficient_tables(params: EquivariantParams) -> dict:
    """Split the dense map into indexed coefficient tensors.

    Keys are ``(out_kind, i, in_kind, s)`` with kinds ``"W"`` or ``"b"`` and
    1-based layers.  A ``("W", i, "W", s)`` table has axes
    ``[j, k, p, q, out_feature, in_feature]`` so that entry ``[j, k, p, q]``
    is the coefficient block from ``W^(s)[p, q]`` to ``W'^(i)[j, k]``.
    """
    A, _ = materialize_dense(params)
    src, tgt = params.source, params.target

    def layout(spec):
        spans, pos = {}, 0
        for i in range(1, spec.L + 1):
            for kind, shape in (("W", spec.weight_shape(i)), ("b", spec.bias_shape(i))):
                size = int(np.prod(shape))
                spans[(kind, i)] = (pos, size, shape)
                pos += size
        return spans

    out_spans, in_spans = layout(tgt), layout(src)
    tables = {}
    for (ok, i), (opos, osize, oshape) in out_spans.items():
        for (ik, s), (ipos, isize, ishape) in in_spans.items():
            block = A[opos:opos + osize, ipos:ipos + isize].reshape(oshape + ishape)
            # move feature axes last: [out idx..., in idx..., out feat, in feat]
            no, ni = len(oshape), len(ishape)
            axes = (list(range(no - 1)) + [no + a for a in range(ni - 1)]
                    + [no - 1, no + ni - 1])
            tables[(ok, i, ik, s)] = block.transpose(axes)
    return tables
