"""Head-posture and neck-EMG toolkit (C++ core)."""

from ._core import (
    Error,
    IoError,
    Model,
    ParseError,
    ValidationError,
    bandpass,
    bandpass_magnitude,
    default_config,
    detect_episodes,
    extract_envelope,
    load_head_csv,
    median_frequency,
    parse_head_frame,
    run_cli,
    score,
    synthesize,
    welch_psd,
)

__all__ = [
    "Error",
    "IoError",
    "Model",
    "ParseError",
    "ValidationError",
    "bandpass",
    "bandpass_magnitude",
    "default_config",
    "detect_episodes",
    "extract_envelope",
    "load_head_csv",
    "median_frequency",
    "parse_head_frame",
    "run_cli",
    "score",
    "synthesize",
    "welch_psd",
]
