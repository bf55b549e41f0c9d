"""divshift: distribution-level classifier disagreement for shift diagnostics.

Quantifies disagreement between classifiers with full-predictive-distribution
divergences (Hellinger, Jensen-Shannon, symmetrized KL) alongside top-1, and
uses those disagreements to estimate out-of-distribution test error without
OOD labels, to detect OOD samples, and to relate both to calibration error.
"""

from .core import (
    EmptyLabels,
    EnsembleManifest,
    LabelOutOfRange,
    LabelVector,
    ManifestError,
    NonFinite,
    NumericalError,
    Pairing,
    PredictionSet,
    RowSumViolation,
    ShapeMismatch,
    ValidationError,
    ZeroTruth,
    DegenerateAbscissa,
    SingularFit,
    enumerate_pairs,
    one_hot,
    validate_labels,
    validate_prediction_set,
)
from .divergence import (
    ALL_NOTIONS,
    DisagreementRecord,
    EpsilonPolicy,
    Notion,
    aggregate_disagreement,
    aggregate_error,
    binary_error_curve,
    compensated_mean,
    dis,
    dis_hellinger,
    dis_jsd,
    dis_kld_sym,
    dis_top1,
    error_pointwise,
    pointwise_disagreement,
    pointwise_error,
    simplex_grid,
)
from .calibration import CalibrationConfig, cace, ensemble_cace
from .linefit import (
    LineFit,
    TransformKind,
    apply_transform,
    fit_transformed,
    invert_transform,
    normal_cdf,
    normal_quantile,
    ols_fit,
    poly3_eval,
    polyfit3,
    resolve_transform,
)
from .estimate import (
    EstimateRow,
    EstimationConfig,
    EstimationReport,
    Method,
    aline_d,
    aline_s,
    build_estimation_report,
    clamp_to_notion_range,
    gate_by_r2,
    mape,
)
from .detect import (
    DEFAULT_SCORE_KINDS,
    DetectionResult,
    ScoreKind,
    detection_suite,
    roc_auc,
    sample_score,
    score_samples,
    severity_from_split,
)
from .synth import SynthConfig, SynthWorld, generate_world, write_world
from .io import (
    BadMagic,
    BadVersion,
    FormatError,
    LoadedEnsemble,
    ShapeOverflow,
    TruncatedPayload,
    load_ensemble,
    load_manifest,
    read_labels,
    read_predictions,
    read_predictions_csv,
    read_prediction_header,
    write_labels,
    write_manifest,
    write_predictions,
)

__version__ = "0.1.0"
