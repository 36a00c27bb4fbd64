"""Elicit expert uncertainty as Beta distributions from binary decision
records, using MC-dropout over a small from-scratch neural network."""

__version__ = "0.1.0"

from .betafit import (
    ElicitedDistribution,
    beta_cdf,
    beta_interval,
    beta_pdf,
    fit_beta_mom,
)
from .datasets import (
    DatasetManifest,
    DecisionRecord,
    load_images,
    load_tabular,
    read_records_csv,
    split,
    write_records_csv,
)
from .diagnostics import (
    DiagnosticsReport,
    EvaluatedRecord,
    PointStatistic,
    agreement_analysis,
    auc_prediction,
    average_reports,
    calibration,
    ci_correct,
    confusion,
    entropy_histograms,
    f_score,
    point_prediction,
    summarize,
)
from .errors import (
    DataError,
    DomainError,
    ElicitError,
    NumericsError,
    SchemaError,
    ShapeError,
    SplitError,
    SupportError,
)
from .netparams import NetworkParams, init_params, load_params, save_params
from .netspec import (
    Conv2d,
    Dense,
    Dropout,
    NetworkSpec,
    Relu,
    Residual,
    SigmoidHead,
    SoftmaxHead,
    residual_mlp_spec,
    spec_from_dict,
    spec_to_dict,
)
from .network import (
    Mode,
    backward,
    bce_loss,
    dropout_mask,
    forward,
    forward_batch,
    grad_check,
    sigmoid,
    softmax,
)
from .rng import derive_stream, derive_subseed, stream_label
from .sampling import ProbabilitySample, credible_interval, mc_sample
from .stats import (
    DiscreteDistribution,
    discretize,
    distribution_entropy,
    kl_divergence,
    point_entropy,
)
from .synthetic import (
    GroundTruth,
    PanelConfig,
    generate,
    oracle_validate,
    read_truth_csv,
    write_truth_csv,
)
from .training import TrainConfig, TrainHistory, lr_schedule, train

__all__ = [
    "__version__",
    "ElicitedDistribution",
    "beta_cdf",
    "beta_interval",
    "beta_pdf",
    "fit_beta_mom",
    "DatasetManifest",
    "DecisionRecord",
    "load_images",
    "load_tabular",
    "read_records_csv",
    "split",
    "write_records_csv",
    "DiagnosticsReport",
    "EvaluatedRecord",
    "PointStatistic",
    "agreement_analysis",
    "auc_prediction",
    "average_reports",
    "calibration",
    "ci_correct",
    "confusion",
    "entropy_histograms",
    "f_score",
    "point_prediction",
    "summarize",
    "DataError",
    "DomainError",
    "ElicitError",
    "NumericsError",
    "SchemaError",
    "ShapeError",
    "SplitError",
    "SupportError",
    "NetworkParams",
    "init_params",
    "load_params",
    "save_params",
    "Conv2d",
    "Dense",
    "Dropout",
    "NetworkSpec",
    "Relu",
    "Residual",
    "SigmoidHead",
    "SoftmaxHead",
    "residual_mlp_spec",
    "spec_from_dict",
    "spec_to_dict",
    "Mode",
    "backward",
    "bce_loss",
    "dropout_mask",
    "forward",
    "forward_batch",
    "grad_check",
    "sigmoid",
    "softmax",
    "derive_stream",
    "derive_subseed",
    "stream_label",
    "ProbabilitySample",
    "credible_interval",
    "mc_sample",
    "DiscreteDistribution",
    "discretize",
    "distribution_entropy",
    "kl_divergence",
    "point_entropy",
    "GroundTruth",
    "PanelConfig",
    "generate",
    "oracle_validate",
    "read_truth_csv",
    "write_truth_csv",
    "TrainConfig",
    "TrainHistory",
    "lr_schedule",
    "train",
]
