"""Semiclassical focusing NLS with a rectangular barrier initial condition.

The package is organized around the pipeline

    scattering -> equilibrium -> gfunction -> riemann_surface -> parametrix
                                                -> rhp_chain -> reconstruct

with ``nls_direct`` providing an independent split-step reference solution
and ``cli`` exposing the whole chain as subcommands.
"""

from .scattering import BarrierParams, admissible_h

__all__ = ["BarrierParams", "admissible_h"]

__version__ = "0.1.0"
