"""
Sliding-window plans over full-length mel grids.
"""

import numpy as np
from attrs import field, frozen

from .. import settings
from ..exceptions import ConfigError, ShortAudio

OVERLAP_MODES = ("count", "frames")


@frozen
class WindowPlan:
    """Window start frames covering ``[0, total_frames)``; the last window ends exactly at ``total_frames``."""

    starts: tuple[int, ...] = field(converter=tuple)
    window: int
    stride: int
    total_frames: int

    def __len__(self):
        return len(self.starts)

    def coverage(self) -> np.ndarray:
        """How many windows cover each frame."""
        counts = np.zeros(self.total_frames, dtype=np.int64)
        for start in self.starts:
            counts[start:start + self.window] += 1
        return counts


def window_stride(overlap: int, window: int = settings.EXCERPT_FRAMES, overlap_mode: str = "count") -> int:
    """
    Stride between window starts.

    ``count``: every frame is covered by up to ``overlap`` windows, so the
    stride is ``window / overlap``. ``frames``: consecutive windows share
    ``overlap`` frames, so the stride is ``window - overlap``.
    """
    if overlap_mode == "count":
        if overlap < 1 or window % overlap:
            raise ConfigError("Invalid overlap", {"overlap": f"must be a positive divisor of {window}, got {overlap}"})
        return window // overlap
    if overlap_mode == "frames":
        if not 0 <= overlap < window:
            raise ConfigError("Invalid overlap", {"overlap": f"must lie in [0, {window}), got {overlap}"})
        return window - overlap
    raise ConfigError("Invalid overlap mode", {"overlap_mode": f"{overlap_mode!r} not in {OVERLAP_MODES}"})


def plan_windows(
    total_frames: int, overlap: int = 4, window: int = settings.EXCERPT_FRAMES, overlap_mode: str = "count"
) -> WindowPlan:
    """Regular windows every ``stride`` frames plus, when needed, one tail-aligned window."""
    if total_frames < window:
        raise ShortAudio(
            f"Input has {total_frames} frames; at least {window} are needed", required=window, got=total_frames
        )
    stride = window_stride(overlap, window, overlap_mode)
    starts = list(range(0, total_frames - window + 1, stride))
    if starts[-1] + window != total_frames:
        starts.append(total_frames - window)
    return WindowPlan(starts, window, stride, total_frames)
