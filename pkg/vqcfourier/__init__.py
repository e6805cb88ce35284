"""Fourier spectra of variational quantum circuits and their Random Fourier Feature surrogates."""

__version__ = "0.1.0"
