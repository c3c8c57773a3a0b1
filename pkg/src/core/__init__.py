"""
Módulo principal: modelo de productividad de investigadores
"""

from .calculator import DiagnosticsCalculator
from .data_loader import DataLoader
from .errors import (
    EstimationError,
    InfeasibleError,
    ModeloError,
    NumericalError,
    SchemaError,
    UnboundedCompensationError,
    ValidacionError,
)
from .model import Attributes, Calibration, ContractState, PreferenceParams, ResearcherRecord, TimeAllocation
from .policy import PolicySolution, solve_policy

__all__ = [
    "DataLoader",
    "DiagnosticsCalculator",
    "Attributes",
    "Calibration",
    "ContractState",
    "PreferenceParams",
    "ResearcherRecord",
    "TimeAllocation",
    "PolicySolution",
    "solve_policy",
    "ModeloError",
    "ValidacionError",
    "SchemaError",
    "NumericalError",
    "UnboundedCompensationError",
    "InfeasibleError",
    "EstimationError",
]
