"""Wavelet-based identification of SETAR delay and thresholds."""

__version__ = "0.1.0"
