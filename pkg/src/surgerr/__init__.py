"""Executional and procedural error analysis for robotic-surgery trials."""

__version__ = "0.1.0"
