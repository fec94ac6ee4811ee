"""Numerical verification of trace inequalities on Lipschitz domains and of
stability bounds for time-harmonic Maxwell scattering with an exterior Calderon
operator."""
__version__ = "0.1.0"

from .errors import LipmaxError
from .reports import BoundCheckReport, Check

__all__ = ["BoundCheckReport", "Check", "LipmaxError", "__version__"]
