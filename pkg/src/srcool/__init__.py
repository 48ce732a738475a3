"""Semiclassical Monte Carlo simulator of superradiant cavity cooling.

Couples Ito stochastic equations for atomic motion along a cavity axis to
second-order cumulant equations for the atomic pseudospins, with an exact
small-N Lindblad solver as ground truth for the spin sector.
"""

__version__ = "0.1.0"
