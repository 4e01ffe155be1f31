"""Synthetic seismic gathers with coherent noise and a from-scratch U-Net denoiser."""

__version__ = "0.1.0"
