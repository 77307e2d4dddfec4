"""Unitary perturbative decompositions of quantum evolution operators.

Time-independent and time-dependent engines, an ion-trap model family and
reference propagators for validation.
"""
from . import linalg, trigpoly, expansion_ti, expansion_td, models, oracle
from .errors import PertevolError
from .trigpoly import TrigPoly

__all__ = ["linalg", "trigpoly", "expansion_ti", "expansion_td", "models", "oracle",
           "PertevolError", "TrigPoly"]
__version__ = "0.1.0"
