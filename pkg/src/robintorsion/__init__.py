"""Robin torsion on planar star-shaped domains.

Curved P2 finite elements for  Lap u = N,  d_nu u + beta u = 0,  with the
torsional rigidity, Steklov spectrum, P-function integral identities,
overdetermined-condition deficits and an area-constrained shape flow.
"""
from .errors import (AdmissibilityLost, ConfigError, EigenNonConvergence, InvertedElement, NonConvergence,
                     NumericalFailure, OrderTooLow, OutsideBall, PositivityViolation, RobinTorsionError,
                     SingularSystem, StepFailure, WindowTooSmall)

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityLost", "ConfigError", "EigenNonConvergence", "InvertedElement", "NonConvergence",
    "NumericalFailure", "OrderTooLow", "OutsideBall", "PositivityViolation", "RobinTorsionError",
    "SingularSystem", "StepFailure", "WindowTooSmall", "__version__",
]
