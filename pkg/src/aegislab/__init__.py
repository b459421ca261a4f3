"""Intrusion-detection robustness and side-channel leakage experiment toolkit."""

__version__ = "0.1.0"
