"""Discrete IRS passive beamforming for max-min SINR via convex-hull relaxation."""

__version__ = "0.1.0"
