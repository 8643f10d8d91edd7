"""Symmetric Toeplitz covariance estimation from lag moduli and eigenvalues,
LP trimming to positive definiteness, and likelihood-ratio maximization."""
from .errors import CapacityError, DegeneracyError, DomainError, NumericalError, ToeplitzMLError
from .matrix import (
    EigenSystem,
    HermToeplitz,
    PhaseVector,
    SnapshotSet,
    SymToeplitz,
    apply_phase,
    build_sinc_model,
    eigh,
    generate_snapshots,
    hermitize,
    likelihood_ratio,
    log_likelihood_ratio,
    make_rng,
    sample_covariance,
    sigma2_ml,
    to_dense,
)
from .spectrum import (
    CorrectedSpectrum,
    ModuliVector,
    OrderSelection,
    redundancy_moduli,
    rmt_correct,
    select_order,
)
from .lp import LpProblem, LpSolution, LpStatus, solve_lp
from .trim import TrimConfig, TrimReport, diagonal_load, sensitivity_matrix, trim, trim_multi, trim_single
from .signs import (
    CriterionKind,
    CriterionSpec,
    SearchResult,
    SignPattern,
    TrimPolicy,
    dp_branch_search,
    eval_criterion,
    exhaustive_search,
    max_element_search,
    redistribute,
)
from .ascent import equalize, equalize_step
from .optimize import OptimizeOutcome, OptimizerConfig, OptimizeStatus, global_check, is_global, lr_gradient, maximize_lr
from .campaign import CampaignConfig, CampaignSummary, TrialRecord, emit_report, run_campaign, run_trial

__version__ = "0.1.0"

__all__ = [
    "CapacityError",
    "DegeneracyError",
    "DomainError",
    "NumericalError",
    "ToeplitzMLError",
    "EigenSystem",
    "HermToeplitz",
    "PhaseVector",
    "SnapshotSet",
    "SymToeplitz",
    "apply_phase",
    "build_sinc_model",
    "eigh",
    "generate_snapshots",
    "hermitize",
    "likelihood_ratio",
    "log_likelihood_ratio",
    "make_rng",
    "sample_covariance",
    "sigma2_ml",
    "to_dense",
    "CorrectedSpectrum",
    "ModuliVector",
    "OrderSelection",
    "redundancy_moduli",
    "rmt_correct",
    "select_order",
    "LpProblem",
    "LpSolution",
    "LpStatus",
    "solve_lp",
    "TrimConfig",
    "TrimReport",
    "diagonal_load",
    "sensitivity_matrix",
    "trim",
    "trim_multi",
    "trim_single",
    "CriterionKind",
    "CriterionSpec",
    "SearchResult",
    "SignPattern",
    "TrimPolicy",
    "dp_branch_search",
    "eval_criterion",
    "exhaustive_search",
    "max_element_search",
    "redistribute",
    "equalize",
    "equalize_step",
    "OptimizeOutcome",
    "OptimizerConfig",
    "OptimizeStatus",
    "global_check",
    "is_global",
    "lr_gradient",
    "maximize_lr",
    "CampaignConfig",
    "CampaignSummary",
    "TrialRecord",
    "emit_report",
    "run_campaign",
    "run_trial",
]
