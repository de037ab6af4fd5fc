"""Finite-difference solver and property checks for a thermoforming
quasi-variational inequality: membrane on a thermally expanding mould."""

__version__ = "0.1.0"
