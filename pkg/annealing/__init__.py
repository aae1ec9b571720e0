"""Adiabatic factorization with CRAB-optimized schedules."""

__version__ = "1.0.0"
