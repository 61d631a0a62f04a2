"""Simulation of itinerant-photon detection by a cascaded transmon chain."""

__version__ = "0.1.0"
