"""Default settings for the timbre_forge pipeline."""

import os

# =========================================================================
# Audio front end
# =========================================================================

# Every clip entering the pipeline is resampled to this rate (Hz).
SAMPLE_RATE = 16000

# RMS normalization target (dBFS). Clips quieter than this are raised to it,
# louder clips are left alone.
TARGET_DB = -30.0

# Silence masking: frame length, gating threshold and the shortest run of
# silent frames that gets zeroed.
SILENCE_FRAME_MS = 25.0
SILENCE_THRESHOLD_DB = -60.0
SILENCE_MIN_GAP_MS = 500.0

# =========================================================================
# Time-frequency analysis
# =========================================================================

N_FFT = 800
HOP_LENGTH = 200
N_MELS = 128

# Added to mel magnitudes before the log so silence stays finite.
LOG_FLOOR = 1e-5

# Fast Griffin-Lim defaults
GRIFFIN_LIM_ITERS = 60
GRIFFIN_LIM_MOMENTUM = 0.99

# =========================================================================
# Model input geometry
# =========================================================================

# Excerpt length in frames (1.6 s at the default hop); also the mel height.
EXCERPT_FRAMES = 128

# =========================================================================
# Environment
# =========================================================================

# Fallback seed used by the CLI when --seed is not given.
SEED_ENV_VAR = "TIMBRE_FORGE_SEED"

# When truthy, every nn op asserts its output is finite.
DEBUG_FINITE_ENV_VAR = "TIMBRE_FORGE_DEBUG_FINITE"


def get_setting(name, default=None):
    """
    Return a setting, preferring a ``TIMBRE_FORGE_<NAME>`` environment override.

    Overrides are parsed with the type of the module-level default.
    """
    module_default = globals().get(name, default)
    raw = os.environ.get(f"TIMBRE_FORGE_{name}")
    if raw is None:
        return module_default
    if isinstance(module_default, bool):
        return raw.strip().lower() in ("1", "true", "yes", "on")
    if isinstance(module_default, (int, float)):
        return type(module_default)(raw)
    return raw


def debug_finite_checks() -> bool:
    """Whether nn ops should assert finite outputs."""
    return os.environ.get(DEBUG_FINITE_ENV_VAR, "").strip().lower() in ("1", "true", "yes", "on")
