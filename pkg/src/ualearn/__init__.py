"""Uncertainty-gated active learning.

A Monte-Carlo-dropout classifier serves as an automatic annotator whose
labels are trusted only below a predictive-entropy threshold, and
pool-based / query-by-committee loops grow a labeled set from an unlabeled
pool using uncertainty and disagreement query strategies.
"""

from .annotator import (
    Annotation,
    AnnotationResult,
    Annotator,
    UQReport,
    annotate,
    annotate_batch,
    uq_report,
    uq_report_to_csv,
)
from .data import (
    BlobSpec,
    Dataset,
    Split,
    SplitSpec,
    class_weights,
    gen_blobs,
    load_features,
    load_network,
    save_features,
    save_network,
    split,
)
from .engine import (
    ALConfig,
    ALState,
    Committee,
    PoolBasedResult,
    QBCResult,
    RoundRecord,
    history_to_csv,
    loss_schedule_step,
    qbc_predict,
    run_pool_based,
    run_qbc,
)
from .errors import NumericError, ParseError, ShapeError
from .mc_dropout import (
    PredictiveDistribution,
    UncertaintyThreshold,
    mc_predict,
    predictive_entropy,
    threshold_from_fraction,
)
from .metrics import (
    ClassificationReport,
    auc_to_csv,
    confusion,
    confusion_to_csv,
    learning_curve_summary,
    report,
    report_to_csv,
    roc_auc_ovr,
)
from .nn import (
    CrossEntropyLoss,
    EpochStats,
    FocalLoss,
    Gradients,
    LayerSpec,
    Network,
    TrainConfig,
    adam_step,
    class_probabilities,
    forward,
    loss_and_grad,
    predict_labels,
    predict_proba,
    train,
    with_dropout_rate,
)
from .strategies import (
    QueryScores,
    entropy_scores,
    least_confident_scores,
    margin_scores,
    select_top_k,
    vote_entropy_scores,
)

__version__ = "0.1.0"

__all__ = [
    "ALConfig", "ALState", "Annotation", "AnnotationResult", "Annotator",
    "BlobSpec", "ClassificationReport", "Committee", "CrossEntropyLoss",
    "Dataset", "EpochStats", "FocalLoss", "Gradients", "LayerSpec",
    "Network", "NumericError", "ParseError", "PoolBasedResult",
    "PredictiveDistribution", "QBCResult", "QueryScores", "RoundRecord",
    "ShapeError", "Split", "SplitSpec", "TrainConfig", "UQReport",
    "UncertaintyThreshold", "adam_step", "annotate", "annotate_batch",
    "auc_to_csv", "class_probabilities", "class_weights", "confusion",
    "confusion_to_csv", "entropy_scores", "forward", "gen_blobs",
    "history_to_csv", "learning_curve_summary", "least_confident_scores",
    "load_features", "load_network", "loss_and_grad", "loss_schedule_step",
    "margin_scores", "mc_predict", "predict_labels", "predict_proba",
    "predictive_entropy", "qbc_predict", "report", "report_to_csv",
    "roc_auc_ovr", "run_pool_based", "run_qbc", "save_features",
    "save_network", "select_top_k", "split", "threshold_from_fraction",
    "train", "uq_report", "uq_report_to_csv", "vote_entropy_scores",
    "with_dropout_rate",
]
