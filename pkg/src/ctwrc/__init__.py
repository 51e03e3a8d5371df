"""Lattice-precoded MIMO cellular two-way relay simulator."""

__version__ = "0.3.0"
