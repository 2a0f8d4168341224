"""Strategic classification with agents who misperceive feature weights."""

from .bias import Identity, Prelec, Tabulated, perceived_weights, prelec, sigma
from .costs import Norm2, PiecewiseLinear, QuadraticDiagonal, WeightedManhattan
from .model import Classifier, classify, score, signed_distance
from .response import AgentParams, respond, respond_population

__all__ = [
    "AgentParams",
    "Classifier",
    "Identity",
    "Norm2",
    "PiecewiseLinear",
    "Prelec",
    "QuadraticDiagonal",
    "Tabulated",
    "WeightedManhattan",
    "classify",
    "perceived_weights",
    "prelec",
    "respond",
    "respond_population",
    "score",
    "sigma",
    "signed_distance",
]

__version__ = "0.1.0"
