"""Reduced-order walking plans and their whole-body embedding on a planar biped."""

__version__ = "0.1.0"
