"""Brute-force dimension of the space of equivariant affine maps ``U -> U'``.

Unknowns are the entries of a dense affine map ``U -> A U + c``.  Each
sampled group element ``g`` imposes ``A rho(g) = rho'(g) A`` and
``c = rho'(g) c``.  Because ``rho(g)`` is a monomial matrix every equation
links at most two unknowns, so the stacked system is block diagonal after
grouping unknowns into connected components.  The rank of each block is
read off its singular values (large blocks, whose nullity is at most one,
are checked by propagating a solution along a spanning tree).  The oracle
never looks at the layer's parameter layout.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from .equivariant import Family, check_spec_pair
from .groups import GroupElement, SubgroupKind, act_arrays, sample
from .weightspace import WeightSpaceSpec, dimension

SCALE_LIMIT = 20000
RCOND = 1e-8
DENSE_COMPONENT_LIMIT = 512


class ScaleLimitError(ValueError):
    pass


def family_subgroup(family) -> SubgroupKind:
    return SubgroupKind.POSITIVE if Family(family) is Family.RELU else SubgroupKind.SIGN_FLIP


def monomial_representation(g: GroupElement, spec: WeightSpaceSpec):
    """``(target, scale)`` with ``rho(g) e_u = scale[u] * e_{target[u]}``.

    Recovered from two probes of the group action: the all-ones point gives
    the scale at each destination, a labelled point gives the source.
    """
    dim = dimension(spec)

    def act_flat(flat):
        W, b, pos = [], [], 0
        for i in range(1, spec.L + 1):
            for shape, out in ((spec.weight_shape(i), W), (spec.bias_shape(i), b)):
                size = int(np.prod(shape))
                out.append(flat[pos:pos + size].reshape(shape))
                pos += size
        W2, b2 = act_arrays(g, W, b)
        return np.concatenate([np.concatenate([w.ravel(), v.ravel()]) for w, v in zip(W2, b2)])

    scale_at_dest = act_flat(np.ones(dim))
    labels = act_flat(np.arange(1.0, dim + 1.0)) / scale_at_dest
    source = np.rint(labels).astype(np.int64) - 1
    if not np.array_equal(np.sort(source), np.arange(dim)):
        raise RuntimeError("group action is not a monomial map on coordinates")
    target = np.empty(dim, dtype=np.int64)
    target[source] = np.arange(dim)
    scale = np.empty(dim)
    scale[source] = scale_at_dest
    return target, scale


def _constraint_rows(g, source_spec, target_spec):
    """Equations ``A[t'(o), t(u)] s(u) - s'(o) A[o, u] = 0`` for every unknown.

    Column ``u = dim U`` is the offset ``c`` (fixed by the group, scale 1).
    """
    t_in, s_in = monomial_representation(g, source_spec)
    t_out, s_out = monomial_representation(g, target_spec)
    t_in = np.append(t_in, t_in.size)
    s_in = np.append(s_in, 1.0)
    n_in = t_in.size
    o = np.repeat(np.arange(t_out.size), n_in)
    u = np.tile(np.arange(n_in), t_out.size)
    first = t_out[o] * n_in + t_in[u]
    second = o * n_in + u
    return first, s_in[u], second, -s_out[o]


def constraint_dimension(groups, source_spec: WeightSpaceSpec, target_spec: WeightSpaceSpec,
                         rcond: float = RCOND) -> int:
    """Null-space dimension of the equivariance constraints for ``groups``."""
    n_unknowns = dimension(target_spec) * (dimension(source_spec) + 1)
    rows = [_constraint_rows(g, source_spec, target_spec) for g in groups]
    a = np.concatenate([r[0] for r in rows])
    va = np.concatenate([r[1] for r in rows])
    b = np.concatenate([r[2] for r in rows])
    vb = np.concatenate([r[3] for r in rows])

    graph = coo_matrix((np.ones(a.size), (a, b)), shape=(n_unknowns, n_unknowns))
    n_comp, comp = connected_components(graph, directed=False)

    eq_comp = comp[a]
    order = np.argsort(eq_comp, kind="stable")
    bounds = np.searchsorted(eq_comp[order], np.arange(n_comp + 1))
    members = np.argsort(comp, kind="stable")
    member_bounds = np.searchsorted(comp[members], np.arange(n_comp + 1))
    local = np.empty(n_unknowns, dtype=np.int64)
    nullity = 0
    small = []
    for c in range(n_comp):
        unk = members[member_bounds[c]:member_bounds[c + 1]]
        eqs = order[bounds[c]:bounds[c + 1]]
        if unk.size > DENSE_COMPONENT_LIMIT:
            nullity += _gain_graph_nullity(unk, a[eqs], va[eqs], b[eqs], vb[eqs], rcond)
            continue
        local[unk] = np.arange(unk.size)
        M = np.zeros((eqs.size, unk.size))
        np.add.at(M, (np.arange(eqs.size), local[a[eqs]]), va[eqs])
        np.add.at(M, (np.arange(eqs.size), local[b[eqs]]), vb[eqs])
        if M.shape[0] > M.shape[1]:
            M = scipy.linalg.qr(M, mode="r")[0][: M.shape[1]]
        small.append((unk.size, scipy.linalg.svd(M, compute_uv=False)))

    sigma_max = max((float(s.max()) for _, s in small if s.size), default=0.0)
    cutoff = rcond * sigma_max
    return nullity + int(sum(size - int(np.sum(s > cutoff)) for size, s in small))


def _gain_graph_nullity(unknowns, a, va, b, vb, rtol) -> int:
    """Nullity (0 or 1) of a connected system of equations ``va x_a + vb x_b = 0``.

    Propagates a candidate solution along a spanning tree and checks every
    equation against it.
    """
    pos = {int(u): i for i, u in enumerate(unknowns)}
    la = np.array([pos[int(x)] for x in a])
    lb = np.array([pos[int(x)] for x in b])
    size = unknowns.size
    ratio = {}
    for i in range(la.size):
        if la[i] != lb[i]:
            ratio.setdefault((la[i], lb[i]), -va[i] / vb[i])
            ratio.setdefault((lb[i], la[i]), -vb[i] / va[i])
    graph = coo_matrix((np.ones(la.size), (la, lb)), shape=(size, size)).tocsr()
    visit, pred = breadth_first_order(graph, 0, directed=False, return_predecessors=True)
    x = np.zeros(size)
    x[0] = 1.0
    for node in visit[1:]:
        x[node] = x[pred[node]] * ratio[(pred[node], node)]
    residual = np.abs(va * x[la] + vb * x[lb])
    scale = np.abs(va * x[la]) + np.abs(vb * x[lb])
    return int(np.all(residual <= rtol * scale))


def completeness_dimension(source: WeightSpaceSpec, target: WeightSpaceSpec, family,
                           samples: int = 40, seed: int = 0,
                           scale_range=(0.5, 2.0)) -> int:
    """Dimension of the affine maps commuting with ``samples`` random elements
    of the family's symmetry group (input/output layers fixed)."""
    check_spec_pair(source, target, family)
    if dimension(source) * dimension(target) > SCALE_LIMIT:
        raise ScaleLimitError(
            f"dim U * dim U' = {dimension(source) * dimension(target)} exceeds {SCALE_LIMIT}"
        )
    rng = np.random.default_rng(seed)
    kind = family_subgroup(family)
    groups = [sample(kind, source.channels, rng, scale_range) for _ in range(samples)]
    return constraint_dimension(groups, source, target)


def permutation_dimension(source: WeightSpaceSpec, target: WeightSpaceSpec,
                          boundary_identity: bool, samples: int = 40, seed: int = 0) -> int:
    """Same oracle for permutation-only symmetry (hidden layers, or every layer)."""
    if dimension(source) * dimension(target) > SCALE_LIMIT:
        raise ScaleLimitError("spec pair too large for the brute-force oracle")
    rng = np.random.default_rng(seed)
    groups = [sample(SubgroupKind.PERM_ONLY, source.channels, rng,
                     boundary_identity=boundary_identity) for _ in range(samples)]
    return constraint_dimension(groups, source, target)


def dense_constraint_dimension(groups, source_spec, target_spec, rcond: float = RCOND) -> int:
    """Reference route: stack the full Kronecker-form system and take one SVD.

    Only practical for tiny specs; used to cross-check the blockwise route.
    """
    def dense_rep(g, spec):
        target, scale = monomial_representation(g, spec)
        R = np.zeros((target.size, target.size))
        R[target, np.arange(target.size)] = scale
        return R

    blocks = []
    n_in = dimension(source_spec)
    n_out = dimension(target_spec)
    for g in groups:
        R_in = np.zeros((n_in + 1, n_in + 1))
        R_in[:n_in, :n_in] = dense_rep(g, source_spec)
        R_in[n_in, n_in] = 1.0
        R_out = dense_rep(g, target_spec)
        # vec over row-major A[o, u]: A R_in - R_out A
        blocks.append(np.kron(np.eye(n_out), R_in.T) - np.kron(R_out, np.eye(n_in + 1)))
    M = np.concatenate(blocks)
    s = scipy.linalg.svd(M, compute_uv=False)
    return int(M.shape[1] - np.sum(s > rcond * s.max()))
