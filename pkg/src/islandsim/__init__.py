"""Deterministic procedural survival-world simulator and RL benchmark."""

__version__ = "0.1.0"
