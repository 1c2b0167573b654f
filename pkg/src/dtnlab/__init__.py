"""Numerical laboratory for boundary determination of conductivities
from the Dirichlet-to-Neumann map on model 3-D domains."""

__version__ = "0.1.0"
