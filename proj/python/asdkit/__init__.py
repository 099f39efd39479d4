"""Acoustic anomaly detection toolkit."""

from ._asdkit import (
    AsdkitError,
    AutoencoderModel,
    ConfigError,
    DataError,
    NumericError,
    auc,
    feature_frames,
    log_mel,
    pauc,
    read_wav,
    roc_curve,
    run_cli,
    synthesize_corpus,
    write_wav,
)

__all__ = [
    "AsdkitError",
    "AutoencoderModel",
    "ConfigError",
    "DataError",
    "NumericError",
    "auc",
    "feature_frames",
    "log_mel",
    "pauc",
    "read_wav",
    "roc_curve",
    "run_cli",
    "synthesize_corpus",
    "write_wav",
]
