"""
Tests for Griffin-Lim phase reconstruction.
"""

import numpy as np
import pytest

from timbre_forge.audio.clip import AudioClip
from timbre_forge.exceptions import ConfigError, ShapeError
from timbre_forge.melspec.griffin_lim import fast_griffin_lim, reconstruct_phase
from timbre_forge.melspec.transforms import stft_magnitude
from timbre_forge.tests.factories import sine


class TestGriffinLim:
    """Tests for fast_griffin_lim."""

    def test_tone_frequency_survives(self):
        """A 440 Hz tone is reconstructed with its spectral peak at 440 Hz."""
        magnitude = stft_magnitude(sine(440.0, 1.0))

        clip = fast_griffin_lim(magnitude, iterations=30)

        assert clip.sample_rate == 16000
        assert len(clip) == 80 * 200
        spectrum = np.abs(np.fft.rfft(clip.samples))
        freqs = np.fft.rfftfreq(len(clip), 1 / 16000)
        assert abs(freqs[np.argmax(spectrum)] - 440.0) <= 2.0

    @pytest.mark.parametrize("seed", range(10))
    def test_error_decreases(self, seed):
        """On random clips the returned estimate beats the zero-phase start."""
        rng = np.random.default_rng(seed)
        magnitude = stft_magnitude(AudioClip(rng.normal(0.0, 0.05, 8000), 16000))

        _, errors = reconstruct_phase(magnitude, iterations=20)

        assert len(errors) == 21
        assert errors[-1] < errors[0]
        assert errors[-1] == min(errors[:-1])

    @pytest.mark.parametrize("seed", range(10))
    @pytest.mark.parametrize("n,k", [(1, 4), (5, 10), (15, 15)])
    def test_more_iterations_never_worse(self, seed, n, k):
        """Running n + k iterations ends no worse than running n on the same grid."""
        rng = np.random.default_rng(seed)
        magnitude = stft_magnitude(AudioClip(rng.normal(0.0, 0.05, 8000), 16000))

        _, fewer = reconstruct_phase(magnitude, iterations=n)
        _, more = reconstruct_phase(magnitude, iterations=n + k)

        assert more[:n] == fewer[:n]
        assert more[-1] <= fewer[-1]

    def test_zero_magnitude(self):
        """An all-zero grid gives silence and zero error."""
        clip, errors = reconstruct_phase(np.zeros((10, 401)), iterations=5)

        assert len(clip) == 2000
        assert not clip.samples.any()
        assert errors == [0.0] * 6

    def test_wrong_width(self):
        """The grid width must match the FFT size."""
        with pytest.raises(ShapeError):
            fast_griffin_lim(np.ones((10, 128)))

    @pytest.mark.parametrize("iterations,momentum,field", [
        (0, 0.99, "iterations"),
        (-3, 0.5, "iterations"),
        (10, 1.0, "momentum"),
        (10, -0.1, "momentum"),
    ])
    def test_invalid_schedule(self, iterations, momentum, field):
        """At least one iteration and a momentum in [0, 1) are required."""
        with pytest.raises(ConfigError) as exc_info:
            fast_griffin_lim(np.ones((10, 401)), iterations=iterations, momentum=momentum)

        assert set(exc_info.value.errors) == {field}

    def test_plain_griffin_lim(self):
        """Zero momentum is allowed."""
        clip = fast_griffin_lim(stft_magnitude(sine(440.0, 0.5)), iterations=3, momentum=0.0)

        assert len(clip) == 40 * 200
