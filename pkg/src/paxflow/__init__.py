"""Simulation of passenger arrivals through an airport immigration hall.

Modules: ingest (event logs), calibrate (walk speeds, desk service rates),
engine (event-based queue simulation), analyze (binned statistics,
saturation, validation) and cli.
"""

__version__ = "0.1.0"
