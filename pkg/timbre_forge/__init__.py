"""
Timbre Forge: mel-spectrogram VAE-GAN timbre transfer.
"""

__version__ = "0.1.0"
