"""Design-based estimation of average effects with Riesz representors."""

from .designs import (
    BernoulliDesign,
    CompleteRandomization,
    EnumeratedDesign,
    IndependentContinuousDesign,
    MomentProvider,
)
from .errors import PositivityViolated, RieszLabError
from .functionals import Coefficient, Contrast, Derivative, DesignDerivative, Integration
from .model_spaces import BasisFunction, ModelSpace
from .pipeline import Pipeline

__all__ = [
    "BasisFunction",
    "BernoulliDesign",
    "Coefficient",
    "CompleteRandomization",
    "Contrast",
    "Derivative",
    "DesignDerivative",
    "EnumeratedDesign",
    "IndependentContinuousDesign",
    "Integration",
    "ModelSpace",
    "MomentProvider",
    "Pipeline",
    "PositivityViolated",
    "RieszLabError",
]
