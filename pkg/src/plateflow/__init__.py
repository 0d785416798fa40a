"""Fluid-loaded plates in a channel: linear theory, stability and pseudospectra."""
__version__ = "0.1.0"
