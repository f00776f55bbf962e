"""Robustness analysis of angle-of-arrival physical-layer authentication under spoofing."""

__version__ = "0.1.0"
