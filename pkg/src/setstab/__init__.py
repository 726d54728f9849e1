"""Finite set-theoretic stability: filters, ideals, set-valued maps and
their forward, backward, weak and global stability, plus interconnections."""

from .core import (
    DEFAULT_CEILING,
    SetFamily,
    Subset,
    Universe,
    all_subsets,
    complement,
    covers,
    down_closure,
    dualize,
    enumerate_family,
    family_subset_of,
    family_union,
    is_filter,
    is_filter_base,
    is_ideal,
    is_ideal_base,
    member_of,
    pair_encode,
    product_base,
    rectangle,
    up_closure,
)
from .errors import (
    AxiomViolation,
    EmptyFamilyError,
    EnumerationRefused,
    HypothesisViolation,
    IncompatibleFamilies,
    NoOntoAlpha,
    NotDirected,
    NotGloballyStable,
    SetStabError,
    UncoveredPoint,
    UniverseMismatch,
    VerdictError,
)
from .interconnect import (
    FeedbackSystem,
    feedback_solution_map,
    gamma_iterate,
    gamma_step,
    parallel_check,
    series_check,
    series_map,
    small_gain_check,
    small_gain_theorem_harness,
    upsilon_projection,
)
from .modelgen import (
    TransitionRelation,
    TrajectoryUniverse,
    ball_filter,
    build_trajectory_universe,
    example_halving,
    example_parallel_counterexample,
    example_weak_lagrange,
    example_weak_stability,
    halving_feedback,
    positivity_ideal,
    run_fixtures,
    safety_ideal,
    solution_map,
    sublevel_ideal,
)
from .relations import SetValuedMap, compose_maps, embedding_map, identity_map, product_map
from .stability import (
    AlphaMap,
    KappaMap,
    alpha_bound_holds,
    check_semilattice_hom,
    construct_alpha,
    construct_kappa,
    ideal_from_uniform_property,
    intersection_h,
    is_backward_stable,
    is_compatible,
    is_forward_stable,
    is_globally_stable,
    is_uniform_property,
    is_weak_backward_stable,
    is_weak_forward_stable,
    kappa_bound_holds,
    verify_k_infinity,
)
from .verdict import StabilityVerdict

__version__ = "0.1.0"
