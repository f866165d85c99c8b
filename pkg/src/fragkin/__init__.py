"""Cascade fragmentation kinetics with a dimensionful power-law subdivision kernel.

Method-of-lines solver, closed-form moment laws, the gamma-type limit law of
rescaled fragment sizes, and a stochastic branching-process oracle.
"""
__version__ = "0.1.0"
