"""
Modelos de datos para factores de tratamiento, términos del modelo y matrices derivadas.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Tuple

import numpy as np

from app.models.errors import ModelSpecError


@dataclass(frozen=True)
class Factor:
    """Factor de tratamiento asignado a un estrato (su estrato "hogar")."""

    name: str
    stratum: str
    levels: Tuple[float, ...]
    qualitative: bool = False

    def __post_init__(self) -> None:
        if len(self.levels) < 2:
            raise ModelSpecError(f"El factor {self.name!r} necesita al menos 2 niveles")
        if len(set(self.levels)) != len(self.levels):
            raise ModelSpecError(f"El factor {self.name!r} tiene niveles repetidos")

    @property
    def supports_quadratic(self) -> bool:
        return not self.qualitative and len(self.levels) >= 3


@dataclass(frozen=True)
class Term:
    """Producto de potencias de factores, p. ej. X1, X1^2 o X1*X3."""

    powers: Tuple[Tuple[str, int], ...]

    def __post_init__(self) -> None:
        if not self.powers:
            raise ModelSpecError("Un término necesita al menos un factor")
        names = [name for name, _ in self.powers]
        if len(set(names)) != len(names):
            raise ModelSpecError(f"Factor repetido en el término {self.text!r}")
        if any(exp < 1 for _, exp in self.powers):
            raise ModelSpecError(f"Exponente inválido en el término {self.text!r}")

    @property
    def factors(self) -> FrozenSet[str]:
        return frozenset(name for name, _ in self.powers)

    @property
    def degree(self) -> int:
        return sum(exp for _, exp in self.powers)

    @property
    def max_exponent(self) -> int:
        return max(exp for _, exp in self.powers)

    @property
    def text(self) -> str:
        return "*".join(name if exp == 1 else f"{name}^{exp}" for name, exp in self.powers)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class TermSpec:
    """Lista ordenada de términos sobre un conjunto de factores."""

    factors: Tuple[Factor, ...]
    terms: Tuple[Term, ...]
    intercept: bool = True
    allow_high_order: bool = False

    def __post_init__(self) -> None:
        known = {f.name for f in self.factors}
        seen = set()
        for term in self.terms:
            if term.powers in seen:
                raise ModelSpecError(f"Término duplicado: {term.text}")
            seen.add(term.powers)
            unknown = term.factors - known
            if unknown:
                raise ModelSpecError(f"Factor desconocido en {term.text}: {', '.join(sorted(unknown))}")
            if term.max_exponent > 2 and not self.allow_high_order:
                raise ModelSpecError(f"Exponente > 2 no permitido: {term.text}")
            for name, exp in term.powers:
                factor = self.factor(name)
                if factor.qualitative and exp > 1:
                    raise ModelSpecError(f"Potencia de un factor cualitativo: {term.text}")

    @property
    def factor_map(self) -> Dict[str, Factor]:
        return {f.name: f for f in self.factors}

    def factor(self, name: str) -> Factor:
        try:
            return self.factor_map[name]
        except KeyError as exc:
            raise ModelSpecError(f"Factor desconocido: {name!r}") from exc

    @property
    def columns(self) -> Tuple[str, ...]:
        """Etiquetas de columna expandidas (los cualitativos generan una por nivel no base)."""
        labels = []
        for term in self.terms:
            parts = [""]
            for name, exp in term.powers:
                factor = self.factor(name)
                if factor.qualitative:
                    pieces = [f"{name}[{level:g}]" for level in factor.levels[1:]]
                else:
                    pieces = [name if exp == 1 else f"{name}^{exp}"]
                parts = [f"{a}*{b}" if a else b for a in parts for b in pieces]
            labels.extend(parts)
        return tuple(labels)

    @property
    def p(self) -> int:
        return len(self.columns) + (1 if self.intercept else 0)

    def restricted_to(self, terms: Tuple[Term, ...]) -> "TermSpec":
        """Misma lista de factores con otro subconjunto de términos."""
        return TermSpec(self.factors, terms, self.intercept, self.allow_high_order)


@dataclass(frozen=True, eq=False)
class ModelMatrix:
    """Matriz del modelo sin la columna del intercepto."""

    values: np.ndarray
    labels: Tuple[str, ...]
    p: int

    @property
    def m(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True, eq=False)
class TreatmentIndicator:
    """Indicadora del modelo de tratamientos completo (una columna por fila distinta)."""

    values: np.ndarray
    labels: np.ndarray
    combinations: np.ndarray = field(repr=False)

    @property
    def t(self) -> int:
        return int(self.values.shape[1])


__all__ = ["Factor", "Term", "TermSpec", "ModelMatrix", "TreatmentIndicator"]
