"""Toolkit for constructing instruction-driven garment-editing datasets and
evaluating try-on / try-off models under an inverse-editing protocol."""

__version__ = "0.1.0"
