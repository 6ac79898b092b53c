"""Semiclassical wave packets with Born-Oppenheimer corrections to arbitrary order.

The package builds Hagedorn wave packet expansions for the time-dependent
Schroedinger equation with a small parameter ``eps`` on an isolated
electronic level, propagates the reference solution with a split-step
solver, and measures the truncation error against the expansion order.
"""

__version__ = "0.1.0"
