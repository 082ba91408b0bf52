"""Shanks-type sequence transformations and Anderson-type mixing for fixed-point problems."""

__version__ = "0.1.0"
