"""Superradiance and Dicke-state entanglement of emitters in a lossy cavity."""
__version__ = "0.1.0"
