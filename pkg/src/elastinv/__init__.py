"""Inverse plane-stress elasticity with coordinate networks."""

__version__ = "0.1.0"
