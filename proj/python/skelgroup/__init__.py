"""Skeleton-based group activity recognition (Python bindings)."""

from ._core import (
    AdamHyper,
    BranchSpec,
    ConfigError,
    Dataset,
    Error,
    EvalReport,
    FusionSpec,
    IoError,
    LabelSource,
    ModelConfig,
    ModelParams,
    NumericError,
    PseudoConfig,
    SyntheticConfig,
    TrainConfig,
    TrainingMode,
    TrainResult,
    adjusted_rand_index,
    cli,
    evaluate,
    generate_synthetic,
    gradcheck,
    init_params,
    kmeans,
    load_checkpoint,
    load_dataset,
    predict_group_logits,
    pseudo_labels,
    split_dataset,
    stand_in_features,
    streams,
    subset,
    train,
    train_and_evaluate,
    write_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")]
