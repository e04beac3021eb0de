# Copyright 2026 The ssep authors
# License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
"""Score-informed music source separation toolkit."""

import json as _json

from ._ssep import (
    DataError,
    NumericError,
    __version__,
    evaluate as _evaluate_json,
    istft,
    rasterize_notes,
    read_wav,
    resample,
    separate,
    separate_file,
    stft,
    synthesize_toy,
    train,
    wiener_denoise,
    write_wav,
)

__all__ = [
    "DataError",
    "NumericError",
    "__version__",
    "evaluate",
    "istft",
    "rasterize_notes",
    "read_wav",
    "resample",
    "separate",
    "separate_file",
    "stft",
    "synthesize_toy",
    "train",
    "wiener_denoise",
    "write_wav",
]


def evaluate(est_dir, ref_dir, frame_sec=1.0, silence_threshold=0.01):
    """Frame-wise SDR report of estimates against references, as a dict."""
    return _json.loads(
        _evaluate_json(est_dir, ref_dir, frame_sec, silence_threshold)
    )
