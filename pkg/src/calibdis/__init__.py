"""Calibration, disagreement, and generalization-disagreement metrics for ensembles.

The package has two layers:

* exact layer: finite synthetic worlds with enumerable inputs, where every
  quantity (accuracy, disagreement, calibration errors, information
  scores) is computed in closed form and every proved identity can be
  checked to floating-point tolerance;
* empirical layer: the same quantities estimated from prediction dumps
  (per-member probability tensors plus labels), with binned calibration
  estimators and rejection-curve analyses.

Hot reductions run through numba-compiled kernels when available; set
CALIBDIS_BACKEND=numpy to force the pure-numpy fallback.
"""

from ._kernels import ACTIVE_BACKEND
from .core import (
    DISAGREEMENT_MODES,
    EnsembleDataset,
    ScoreSet,
    ValidationError,
    ValidationPolicy,
    ValidationReport,
    apply_top,
    expected_disagreement,
    expected_test_error,
    gde_gap,
    marginal,
    per_sample_accuracy,
    per_sample_pred_acc,
    top1_quantities,
    validate_dataset,
)
from .calibration import (
    BinningScheme,
    CalibrationReport,
    cace,
    cace_qweighted,
    calibration_report,
    cwce,
    ecace,
    ece,
    label_score_set,
    make_bins,
    self_score_set,
)
from .info import (
    EntropicGdeReport,
    InfoConfig,
    InfoReport,
    approx_bald,
    approx_entropy,
    bald,
    bald_kl,
    cross_entropy_dataset,
    entropic_gde_report,
    info_report,
    shannon_entropy,
    test_error_upper_bound,
)
from .worlds import (
    FiniteWorld,
    ExactReport,
    SplitMix64,
    TheoremCheck,
    TheoremReport,
    build_classwise_calibrated_world,
    build_random_world,
    build_two_regime_world,
    check_classwise_calibration,
    check_tautology,
    exact_report,
    expand_world_dataset,
    sample_dataset,
    verify_dataset,
    verify_theorems,
    world_apply_top,
    world_marginal,
)
from .rejection import (
    RejectionCurve,
    RejectionRow,
    SweepSpec,
    emit_curve,
    per_sample_score,
    rejection_curve,
)
from . import formats

__version__ = "0.1.0"

__all__ = [
    "ACTIVE_BACKEND",
    "__version__",
    "DISAGREEMENT_MODES",
    "EnsembleDataset",
    "ScoreSet",
    "ValidationError",
    "ValidationPolicy",
    "ValidationReport",
    "apply_top",
    "expected_disagreement",
    "expected_test_error",
    "gde_gap",
    "marginal",
    "per_sample_accuracy",
    "per_sample_pred_acc",
    "top1_quantities",
    "validate_dataset",
    "BinningScheme",
    "CalibrationReport",
    "cace",
    "cace_qweighted",
    "calibration_report",
    "cwce",
    "ecace",
    "ece",
    "label_score_set",
    "make_bins",
    "self_score_set",
    "EntropicGdeReport",
    "InfoConfig",
    "InfoReport",
    "approx_bald",
    "approx_entropy",
    "bald",
    "bald_kl",
    "cross_entropy_dataset",
    "entropic_gde_report",
    "info_report",
    "shannon_entropy",
    "test_error_upper_bound",
    "FiniteWorld",
    "ExactReport",
    "SplitMix64",
    "TheoremCheck",
    "TheoremReport",
    "build_classwise_calibrated_world",
    "build_random_world",
    "build_two_regime_world",
    "check_classwise_calibration",
    "check_tautology",
    "exact_report",
    "expand_world_dataset",
    "sample_dataset",
    "verify_dataset",
    "verify_theorems",
    "world_apply_top",
    "world_marginal",
    "RejectionCurve",
    "RejectionRow",
    "SweepSpec",
    "emit_curve",
    "per_sample_score",
    "rejection_curve",
    "formats",
]
