"""Finite-volume solver for weakly compressible moist-air flow coupled to a
warm-rain bulk cloud model, with a Legendre polynomial-chaos layer for
propagating uncertainty in cloud initial data and microphysical parameters."""

from cloudsg.constants import MicroParams, PhysConsts

__all__ = ["PhysConsts", "MicroParams"]
__version__ = "0.1.0"
