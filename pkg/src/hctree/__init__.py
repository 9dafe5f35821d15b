"""Hierarchical clustering trees from triplet and k-tuple constraints."""

from .core import (
    BudgetError,
    ConstraintSet,
    HierarchicalTree,
    KTuple,
    OrientedSet,
    ParseError,
    PointSet,
    SplitPair,
    ThreeWay,
    Triplet,
    default_points,
    parse_constraints,
    parse_newick,
    serialize_constraints,
    tree_from_nested,
    validate_tree,
    write_newick,
)
from .tree_ops import (
    binarize,
    enumerate_binary_trees,
    enumerate_multiway_trees,
    extract_triplets,
    ladder,
    lca,
    orientation_of,
    random_binary_tree,
    random_multiway_tree,
    satisfies,
)
from .builder import (
    BuildOutcome,
    ClosedSetWitness,
    build_agnostic,
    build_binary,
    build_nonbinary,
    find_closed_set,
    reduce_ktuple,
    shared_pair_decomposition,
)
from .msf import (
    CoupledGraph,
    MsfBackend,
    MsfDebug,
    NaiveMsfBackend,
    PhaseLog,
    build_coupled_graph,
    build_ktuple_via_msf,
    build_via_msf,
    cut_inter_component_edges,
)
from .dimension import (
    connect_critical_set,
    construct_shattered_set,
    construct_tuple_chain,
    exists_contradictory_orientation,
    find_critical_set,
    is_n_shattered,
    natarajan_dimension,
    tuple_threshold_check,
)
from .online import (
    ConstantLearner,
    HalvingLearner,
    LittlestoneTree,
    TreeConsistentLearner,
    adversary_game,
    build_littlestone_tree,
    halving_adversary_run,
    rank_order_check,
    verify_shattered,
)
from .pac import (
    ExperimentConfig,
    contradiction_threshold,
    distance_labeler,
    run_agnostic,
    run_nonbinary,
    run_realizable,
    sample_labeled_triplet,
)
from .estimator import TripletHierarchyClassifier

__version__ = "0.1.0"
