"""Trigopt - Logic-Triggered Optimal Control Toolkit."""

__version__ = "1.0.0"
