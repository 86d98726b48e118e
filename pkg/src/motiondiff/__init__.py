"""Conditional denoising-diffusion synthesis of styled skeletal motion clips."""

__version__ = "0.1.0"
