"""Numerical r-th mean curvatures, Newton transformations and r-stability of hypersurfaces."""

__version__ = "0.1.0"
