"""Correct covariate-shifted training data using duplicate counts from integrated sources."""

__version__ = "0.1.0"
