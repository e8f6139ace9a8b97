"""Molecular image recognition: synthetic data, dual-stream model, post-processing."""
__version__ = "0.1.0"
