"""Critical batch size and learning rate scaling analysis for training sweeps.

The package ingests sweep results (validation loss over learning rate, batch
size, token budget, and model width), locates per-cell optimal learning
rates, fits the optimal-lr bell curve per budget under three uncertainty
conventions, fits shifted power laws to the resulting critical parameters,
and extrapolates a recommended learning rate for a target horizon. Schedule
generation, width-transfer multipliers, noise-scale evaluators, and a
synthetic oracle for end-to-end validation round out the toolkit.
"""

__version__ = "0.1.0"

from .extrapolate import classify_regime, fit_bstar_drift, recommend, snap_pow2
from .mup import enumerate_grid, width_multipliers
from .powerlaw import (
    ConsolidatedExponent,
    PowerLawParams,
    consolidate_exponent,
    eval_powerlaw,
    fit_powerlaw,
    power_law,
    refit_fixed_exponent,
)
from .profiles import (
    LossProfile,
    best_loss_per_batch,
    build_profile,
    find_optimum,
    optimal_batch,
    sensitivity_curve,
)
from .run_store import (
    OptimumTable,
    RunRecord,
    RunSet,
    aggregate_optima,
    emit_csv,
    filter_runs,
    ingest_csv,
    load_runs,
)
from .schedule import ScheduleSpec, emit_step_schedule, eval_schedule, schedule_curve
from .surge import (
    EPS_FLOOR,
    MEAN_SIGMA,
    NO_ERROR,
    VARIANTS,
    SurgeParams,
    eval_surge,
    fit_all_budgets,
    fit_surge,
)
from .synth import OracleSpec, gen_surface, ground_truth_eta_star, reference_oracle

__all__ = [
    "__version__",
    "classify_regime",
    "fit_bstar_drift",
    "recommend",
    "snap_pow2",
    "enumerate_grid",
    "width_multipliers",
    "ConsolidatedExponent",
    "PowerLawParams",
    "consolidate_exponent",
    "eval_powerlaw",
    "fit_powerlaw",
    "power_law",
    "refit_fixed_exponent",
    "LossProfile",
    "best_loss_per_batch",
    "build_profile",
    "find_optimum",
    "optimal_batch",
    "sensitivity_curve",
    "OptimumTable",
    "RunRecord",
    "RunSet",
    "aggregate_optima",
    "emit_csv",
    "filter_runs",
    "ingest_csv",
    "load_runs",
    "ScheduleSpec",
    "emit_step_schedule",
    "eval_schedule",
    "schedule_curve",
    "EPS_FLOOR",
    "MEAN_SIGMA",
    "NO_ERROR",
    "VARIANTS",
    "SurgeParams",
    "eval_surge",
    "fit_all_budgets",
    "fit_surge",
    "OracleSpec",
    "gen_surface",
    "ground_truth_eta_star",
    "reference_oracle",
]
