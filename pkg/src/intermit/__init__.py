"""intermit: a numerical laboratory for interval maps with neutral fixed points.

Builds induced first-return (Gibbs-Markov) schemes, does exact symbolic
calculus on their cylinder sets, solves Bowen-type dimension equations,
assembles ratio-controlled repeller families, and generates explicit points
whose empirical measures track a prescribed target in the simplex, with
machine-checkable certificates throughout.
"""

from .maps import (
    Branch,
    MapSpec,
    build_example_map,
    build_thaler_family,
    branch_inverse,
    validate_assumptions,
)
from .inducing import (
    InducedScheme,
    ReturnSymbol,
    TailTable,
    ExpansionStats,
    build_scheme,
    region_of,
    hit_time,
    symbol_of,
    tail_table,
    expansion_stats,
)
from .cylinders import (
    Cylinder,
    alphabet,
    batch_words,
    concat,
    enumerate_words,
    locate,
    make_word,
    ratio,
)
from .dimension import (
    FamilyMeasure,
    build_measure,
    compute_N1,
    dim_bounds,
    local_dim_scan,
    vdim,
)
from .approximation import (
    ApproxFamily,
    ConnectorSet,
    PoolReport,
    assemble_family,
    candidate_pool,
    family_from_leaves,
    find_connectors,
    horizon_constants,
    pool_leaves,
    verify_family,
    window_family,
)
from .bridging import (
    BridgeSchedule,
    GenericPoint,
    TargetSpec,
    bridge_measure,
    generate_point,
    local_dim_profile,
    plan_schedule,
    replay_check,
    verify_generic,
)
from .lab import (
    OccupancyTrace,
    coding_check,
    ensemble_run,
    limit_set_estimate,
    simulate_many,
    simulate_occupancy,
)

__version__ = "0.1.0"
