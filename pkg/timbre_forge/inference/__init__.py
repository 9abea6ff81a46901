"""
Full-length inference: window plans, overlap-averaged translation and vocoders.
"""

from .transfer import InferenceConfig, TransferResult, end_to_end, transfer_full
from .vocoders import (
    GriffinLimVocoder,
    Vocoder,
    available_vocoders,
    get_vocoder,
    register_vocoder,
)
from .windows import WindowPlan, plan_windows, window_stride
