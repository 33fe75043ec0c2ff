"""Sequential learning harness: a small CNN trained on data that arrives day by day."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    IoError,
    NumericError,
    ParseError,
    UsageError,
    assess,
    config_text,
    gen_synthetic,
    grad_check,
    main,
    plateau_detect,
    read_metrics,
    read_pgm,
    rotate90,
    run_experiment,
    spike_detect,
    split,
    write_pgm,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "IoError",
    "NumericError",
    "ParseError",
    "UsageError",
    "assess",
    "config_text",
    "gen_synthetic",
    "grad_check",
    "main",
    "plateau_detect",
    "read_metrics",
    "read_pgm",
    "rotate90",
    "run_experiment",
    "spike_detect",
    "split",
    "write_pgm",
]
