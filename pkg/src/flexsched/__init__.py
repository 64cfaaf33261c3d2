"""flexsched: microgrid scheduling with feeder ramp-flexibility support."""

__version__ = "0.1.0"
