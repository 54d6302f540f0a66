"""Two-stage Wasserstein-DRO dispatch of a multi-energy microgrid."""

__version__ = "0.1.0"
