"""Langevin Monte Carlo laboratory: samplers, exact Fisher-information oracles, bounds."""

__version__ = "0.1.0"
