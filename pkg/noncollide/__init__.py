"""noncollide: simulation and verification of non-colliding particle systems."""

__version__ = "0.1.0"
