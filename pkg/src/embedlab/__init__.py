"""Ordinal embedding laboratory.

Random and ground-truth constraint instances, realizability certificates via
pair-graph acyclicity, exact constraint-graph arboricity, the maximum-acyclic
-subgraph reduction, hinge-loss embedding training, and the experiment sweeps
tying them together.
"""

from .embedding import Embedding
from .errors import (
    CannotSplitError,
    DivergenceError,
    InvalidInputError,
    InvalidInstanceError,
    InvalidParameterError,
    LabError,
    UndefinedDensityError,
)
from .evaluation import BaselineResult, evaluate_accuracy, trivial_baseline
from .instances import (
    GeneratorKind,
    GeneratorMeta,
    Instance,
    Quadruplet,
    Triplet,
    generate_ground_truth_sphere,
    generate_poisson_quadruplets,
    generate_poisson_triplets,
    generate_uniform_quadruplets,
    generate_uniform_triplets,
    read_instance,
    read_points,
    write_instance,
    write_points,
)
from .constraint_graph import (
    ArboricityReport,
    ConstraintMultigraph,
    arboricity,
    build_constraint_graph,
    monte_carlo_arboricity_bound,
    split_constraint_graph,
    subadditivity_check,
)
from .mas import (
    MasGraph,
    MasSolution,
    brute_force_mas,
    brute_force_triplet_opt,
    embed_permutation,
    extract_permutation,
    random_permutation_baseline,
    reduce_mas_to_triplets,
)
from .realizability import (
    PairDigraph,
    RealizabilityCertificate,
    build_pair_digraph,
    certify,
    complete_ordering,
    embed_from_ordering,
    monte_carlo_acyclicity,
    verify_witness_cycle,
)
from .training import TrainConfig, TrainResult, full_batch_gd, hinge_gradient, hinge_loss, train
from .experiments import (
    SweepConfig,
    SweepRecord,
    default_dimension_grid,
    predicted_epsilon,
    run_sweep,
    verify_lemmas,
    verify_theorem3,
)

__version__ = "0.1.0"
