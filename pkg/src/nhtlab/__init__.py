"""Numerical laboratory for resonances generated by normally hyperbolic trapping.

Modules: gridquant (grid and quantization), model1d (model operator and
quasimode), spectral (resonances and resolvent norms), ladder (ladder
operator and transport), dynamics (flows and expansion rates), measures
(phase-space densities), cli (experiment runner).
"""

from .errors import NHTLabError

__version__ = "0.1.0"

__all__ = ["NHTLabError", "__version__"]
