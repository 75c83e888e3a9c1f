"""Grid-world multi-agent benchmark with hypothesis-driven opponent modelling."""

__version__ = "0.1.0"
