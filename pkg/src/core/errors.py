"""Excepciones del modelo de productividad"""

from typing import Any, Dict, List, Optional


class ModeloError(Exception):
    """Error base del proyecto"""


class ValidacionError(ModeloError, ValueError):
    """Datos o parámetros que violan los invariantes del modelo"""


class SchemaError(ValidacionError):
    """Columna faltante o inválida en el dataset canónico"""

    def __init__(self, column: str, message: Optional[str] = None):
        self.column = column
        super().__init__(message or f"Columna requerida ausente: '{column}'")


class NumericalError(ModeloError, RuntimeError):
    """Falla numérica (no convergencia) con diagnóstico adjunto"""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class UnboundedCompensationError(NumericalError):
    """Ningún salario M̃ > 0 logra la indiferencia"""


class InfeasibleError(NumericalError):
    """Restricción de factibilidad imposible de satisfacer"""


class EstimationError(NumericalError):
    """Todos los candidatos de la búsqueda fueron penalizados"""

    def __init__(self, message: str, trace: Optional[List[Dict[str, Any]]] = None):
        self.trace = trace or []
        super().__init__(message, {"trace": self.trace})
