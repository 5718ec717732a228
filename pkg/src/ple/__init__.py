"""Partial-label embedding for denoising distantly typed entity mentions."""

__version__ = "0.1.0"
