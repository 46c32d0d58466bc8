"""Bipartite quantum dynamics with mean-field branches and dissipation phases."""

__version__ = "0.1.0"
