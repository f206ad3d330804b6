"""tidwatch: traveling-ionospheric-disturbance detection from sTEC-rate streams.

Pipeline stages, each its own module:

- ingest:     sTEC-rate CSV parsing, minute resampling, arc segmentation
- gadf:       windowed Gramian angular difference field image encoding
- dataset:    window labeling, class balancing, train/test splitting
- cnn:        compact convolutional binary classifier (numpy/Cython, no
              deep-learning framework)
- fpm:        cross-station vote-fraction filtering of raw detections
- evaluation: sequence-level precision/recall/F1 over detection runs
- synth:      multi-station synthetic scenarios with exact ground truth
- cli:        subcommand front end (`tidwatch synth|train|detect|fpm|eval|run-e2e`)
"""

__version__ = "0.1.0"

from .errors import (
    ChecksumError,
    ConfigError,
    DataFormatError,
    NumericError,
    TidwatchError,
    VersionError,
)

__all__ = [
    "ChecksumError",
    "ConfigError",
    "DataFormatError",
    "NumericError",
    "TidwatchError",
    "VersionError",
    "__version__",
]
