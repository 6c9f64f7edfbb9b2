"""Deep generative population synthesis with boundary/average distance regularizers."""

__version__ = "0.1.0"
