"""Neural functionals equivariant to monomial (scale and permutation) symmetries of weight spaces."""

from .completeness import completeness_dimension
from .equivariant import (EquivariantParams, Family, apply, apply_relu, apply_sintanh,
                          baseline_hnp_count, baseline_np_count, param_count, random_params)
from .groups import GroupElement, MonomialElement, SubgroupKind, act_weights, compose, inverse, sample
from .invariant import (AlphaKind, InvariantPipelineConfig, apply_alpha_stage, apply_invariant,
                        normalize_average_pool, pool_stage)
from .network import CNN, FCNN, ActivationKind, check_invariance, forward
from .nfn import NfnStack, build_stack, train_toy
from .preservation import classify_monomial, is_preserved
from .weightspace import WeightSpacePoint, WeightSpaceSpec, deserialize, dimension, random_point, serialize

__all__ = [
    "ActivationKind", "AlphaKind", "CNN", "EquivariantParams", "FCNN", "Family", "GroupElement",
    "InvariantPipelineConfig", "MonomialElement", "NfnStack", "SubgroupKind", "WeightSpacePoint",
    "WeightSpaceSpec", "act_weights", "apply", "apply_alpha_stage", "apply_invariant", "apply_relu",
    "apply_sintanh", "baseline_hnp_count", "baseline_np_count", "build_stack", "check_invariance",
    "classify_monomial", "completeness_dimension", "compose", "deserialize", "dimension", "forward",
    "inverse", "is_preserved", "normalize_average_pool", "param_count", "pool_stage", "random_params",
    "random_point", "sample", "serialize", "train_toy",
]
