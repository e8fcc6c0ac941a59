"""Spectrum of the delta-interaction supported on a cone in three dimensions.

Modules
-------
geometry     cone model and the ray frame ``(s, t) <-> (r, z)``
profiles     cutoff profiles and the Hardy-type condition
trial        trial functions, reduced forms and eigenvalue certificates
weyl         singular sequences at the essential threshold
bracket      Neumann bracketing lower bounds
discretize   finite element pencil of the axisymmetric fibre
eigensolve   shift-invert eigensolver and inertia counts
cli          command line interface
"""
__version__ = "0.1.0"

from .errors import ConeDeltaError, InvalidInput, NumericalFailure
from .geometry import ConeModel, RayFrame, rz_to_st, st_to_rz, weight_r

__all__ = ["ConeDeltaError", "InvalidInput", "NumericalFailure", "ConeModel", "RayFrame", "rz_to_st",
           "st_to_rz", "weight_r", "__version__"]
