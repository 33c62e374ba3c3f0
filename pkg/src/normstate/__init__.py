"""Normalized ground states of Sobolev-critical coupled Schrödinger systems."""

__version__ = "0.1.0"
