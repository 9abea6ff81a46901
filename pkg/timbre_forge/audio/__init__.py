"""
Audio loading, preprocessing and dataset manifests.
"""

from .clip import AudioClip, load_wav, write_wav
from .manifest import (
    DatasetManifest,
    load_manifest,
    save_manifest,
    split_dataset,
    summarize_manifest,
)
from .prep import (
    PreprocessConfig,
    mask_silence,
    preprocess_clip,
    resample,
    rms_db,
    rms_normalize,
)

__all__ = [
    "AudioClip",
    "DatasetManifest",
    "PreprocessConfig",
    "load_manifest",
    "load_wav",
    "mask_silence",
    "preprocess_clip",
    "resample",
    "rms_db",
    "rms_normalize",
    "save_manifest",
    "split_dataset",
    "summarize_manifest",
    "write_wav",
]
