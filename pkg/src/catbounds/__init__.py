"""Convergence bounds for nonstationary Markovian queues with catastrophes."""

from .bounds import (
    BoundReport,
    ContractionRate,
    Envelope,
    PublishedClaims,
    beta_double_star,
    build_report,
    fit_envelope,
    integrate_beta,
    limit_bound,
    limit_bound_value,
    mean_coefficient,
)
from .generator import apply_weights, build_A, build_A_star
from .model import (
    BSequence,
    Catastrophes,
    CatastropheTail,
    QueueModel,
    TimeFunction,
    WeightSequence,
    b_partial_tail,
    beta_star,
    eval_rate,
    weight_constants,
)
from .montecarlo import PathEnsemble, compare_tv, simulate_paths
from .schema import ModelSpec, dump_spec, load_spec, parse_spec
from .solver import (
    PairDiagnostics,
    Trajectory,
    conditional_mean,
    limiting_regime_check,
    pair_diagnostics,
    solve_forward,
    solve_reduced,
)

__version__ = "0.1.0"
