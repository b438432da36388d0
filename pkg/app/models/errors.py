"""
Jerarquía de excepciones del dominio y registros de validación.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence


class EstratoError(Exception):
    """Error base de la aplicación."""


class FormulaSyntaxError(EstratoError):
    """Error de sintaxis en una fórmula de estructura de unidades."""

    def __init__(self, message: str, position: int, formula: str = "") -> None:
        self.position = position
        self.formula = formula
        super().__init__(f"{message} (posición {position})")

    def caret(self) -> str:
        """Devuelve la fórmula con un marcador bajo la posición del error."""
        return f"{self.formula}\n{' ' * self.position}^"


class StructureError(EstratoError):
    """Estructura de unidades inválida o estrato desconocido."""


class ModelSpecError(EstratoError):
    """Especificación de términos o factores inválida."""


class CriterionError(EstratoError):
    """Pesos de criterio o esquema de bloqueo inconsistentes."""


class NumericalError(EstratoError):
    """Fallo numérico (matriz vacía, no definida positiva, cuantil infinito)."""


class DimensionMismatchError(EstratoError):
    """El archivo de diseño no encaja con la estructura configurada."""


class InfeasibleStartError(EstratoError):
    """No se encontró un diseño inicial no singular dentro del límite de intentos."""

    def __init__(self, stratum: str, attempts: int, detail: str = "") -> None:
        self.stratum = stratum
        self.attempts = attempts
        msg = f"Sin diseño inicial no singular en el estrato {stratum} tras {attempts} intentos"
        super().__init__(f"{msg}: {detail}" if detail else msg)


@dataclass(frozen=True)
class ConfigValidationError:
    """Representa un error de validación en un archivo de configuración."""

    field_path: str
    error_message: str
    value: Optional[str] = None

    def __str__(self) -> str:
        suffix = f" (valor: {self.value})" if self.value is not None else ""
        return f"{self.field_path}: {self.error_message}{suffix}"


class ConfigError(EstratoError):
    """Configuración inválida; agrupa todos los errores encontrados."""

    def __init__(self, errors: Sequence[ConfigValidationError], source: str = "") -> None:
        self.errors: List[ConfigValidationError] = list(errors)
        self.source = source
        lines = "; ".join(str(e) for e in self.errors)
        prefix = f"{source}: " if source else ""
        super().__init__(f"{prefix}{lines}")


__all__ = [
    "EstratoError",
    "FormulaSyntaxError",
    "StructureError",
    "ModelSpecError",
    "CriterionError",
    "NumericalError",
    "DimensionMismatchError",
    "InfeasibleStartError",
    "ConfigValidationError",
    "ConfigError",
]
