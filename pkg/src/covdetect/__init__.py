"""Covariance-based device activity detection for massive random access.

Maximum-likelihood and NNLS estimators of the large-scale fading vector,
Fisher-information identifiability tests, an asymptotic error predictor and
the joint activity / data detector, plus a command-line experiment harness.
"""

__version__ = "0.1.0"

from .embed import (
    EmbedConfig,
    EmbedGroundTruth,
    JointDecision,
    detect_joint,
    gen_embed_ground_truth,
    joint_error_counts,
    lift_sequences,
    phase_sweep_embed,
)
from .errordist import (
    ErrorSampleSet,
    GaussianSampler,
    RocCurve,
    equal_error_rate,
    error_distribution,
    pfa_at_pmd,
    pmd_at_pfa,
    predict_roc,
    project_qp,
    roc_activity,
    roc_joint,
    sample_gaussian,
)
from .estimators import ActivityDetector, JointActivityDetector
from .exceptions import ConfigError, CovDetectError, InconclusiveError, NumericalError
from .fisher import BlockSplit, FisherMatrix, LiftedMatrices, block_split, build_D, fisher_matrix, khatri_rao, null_space
from .model import (
    CovMatrix,
    GroundTruth,
    SequenceMatrix,
    SystemConfig,
    default_noise_var,
    gen_ground_truth,
    gen_sequences,
    sample_covariance,
    simulate,
    true_covariance,
)
from .phase import (
    ConditionVerdict,
    PhaseGrid,
    check_condition,
    check_condition_covmatch,
    check_condition_fim,
    check_dim_necessary,
    empirical_transition,
    phase_sweep,
)
from .solvers import (
    Detection,
    Estimate,
    SolverConfig,
    coordinate_descent_mle,
    coordinate_descent_regularized,
    detect,
    mle_gradient,
    mle_objective,
    nnls,
)

__all__ = [name for name in dir() if not name.startswith("_")]
