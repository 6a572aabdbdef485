"""Certified globally optimal two-layer ReLU training via convex group Lasso.

The non-convex weight-decay training problem of a (wide enough) two-layer
ReLU network shares its optimal value with a cone-constrained group-Lasso
program over the data's activation patterns.  This package enumerates or
samples those patterns, solves the convex program with a checkable duality
gap, maps solutions back to balanced networks, and ships the baselines and
1-D / volume-ratio dictionary specializations used to sanity-check the
equivalence end to end.
"""

from .arrangements import (
    ArrangementReport,
    chamber_constraints,
    enumerate_exact,
    is_zonotope_vertex,
    numerical_rank,
    pattern_count_bound,
    pattern_of,
    sample_patterns,
)
from .baseline import OracleResult, TrainConfig, brute_force_oracle, train_sgd
from .cones import ChamberCone, cone_from_pattern, cone_restricted_dual_norm, contains, project
from .core import (
    ActivationPattern,
    ConvergenceError,
    DataMatrix,
    Labels,
    NetMeta,
    PatternSet,
    RegularizationConvention,
    ScaleLimitError,
    ShapeError,
    TwoLayerNet,
    balance_rescale,
    nonconvex_objective,
    predict,
)
from .reconstruct import ReconstructionReport, reconstruct_net, verify_chamber_consistency
from .solver import (
    GroupLassoProblem,
    GroupLassoSolution,
    LassoSolution,
    PathPoint,
    beta_max,
    build_problem,
    certify,
    fitted_values,
    group_prox,
    lasso_beta_max,
    reg_path,
    solution_objective,
    solution_to_json_dict,
    solve,
    solve_lasso,
)
from .univariate import (
    UnivariateDictionary,
    UnivariateFit,
    build_univariate_dictionary,
    solve_univariate,
    univariate_beta_max,
)
from .wedge import (
    WedgeDictionary,
    WedgeFit,
    build_wedge_dictionary,
    lp_weight_decay_objective,
    realize_planar_network,
    train_wedge_lasso,
    wedge_beta_max,
    wedge_signed_volume,
)

__version__ = "0.1.0"
