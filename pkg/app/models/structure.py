"""
Modelos de datos para estructuras de unidades y sus estratos.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Optional, Tuple

import numpy as np

from app.models.errors import StructureError

MEAN_LABEL = "Mean"
TOP_NODE = "Experiment"


@dataclass(frozen=True)
class UnitFactorNode:
    """Factor de unidades (nodo del diagrama de Hasse)."""

    name: str
    size: int
    parents: FrozenSet[str] = frozenset()


@dataclass(frozen=True)
class Stratum:
    """Estrato derivado: combinación de factores de unidades."""

    label: str
    factors: Tuple[str, ...]
    units: int
    df: int
    name: str

    @property
    def is_mean(self) -> bool:
        return not self.factors

    def contains(self, other: "Stratum") -> bool:
        """True si `other` es más grueso o igual (sus factores están incluidos)."""
        return set(other.factors) <= set(self.factors)

    def strictly_contains(self, other: "Stratum") -> bool:
        return self.contains(other) and len(other.factors) < len(self.factors)

    def matches(self, key: str) -> bool:
        return key in (self.label, self.name)


@dataclass(frozen=True, eq=False)
class UnitStructure:
    """Estructura de unidades ortogonal simple ya analizada."""

    formula: str
    nodes: Tuple[UnitFactorNode, ...]
    strata: Tuple[Stratum, ...]
    n: int
    # árbol de análisis, usado para el render canónico
    tree: object = field(default=None, repr=False, compare=False)

    @property
    def S(self) -> int:
        """Número de términos aleatorios de bloqueo (estratos entre Mean y el inferior)."""
        return max(len(self.strata) - 2, 0)

    @property
    def factor_names(self) -> Tuple[str, ...]:
        return tuple(node.name for node in self.nodes if node.name != TOP_NODE)

    @property
    def sizes(self) -> Dict[str, int]:
        return {node.name: node.size for node in self.nodes if node.name != TOP_NODE}

    @property
    def mean(self) -> Stratum:
        return self.strata[0]

    @property
    def bottom(self) -> Stratum:
        return self.strata[-1]

    @property
    def random_strata(self) -> Tuple[Stratum, ...]:
        return tuple(s for s in self.strata[1:-1])

    def stratum(self, key: str) -> Stratum:
        for s in self.strata:
            if s.matches(key):
                return s
        raise StructureError(f"Estrato desconocido: {key!r}")

    def find_stratum(self, factors: FrozenSet[str]) -> Optional[Stratum]:
        for s in self.strata:
            if frozenset(s.factors) == factors:
                return s
        return None

    def index(self, stratum: Stratum) -> int:
        return self.strata.index(stratum)

    @cached_property
    def unit_levels(self) -> np.ndarray:
        """Índices de nivel (base 0) de cada unidad en orden lexicográfico canónico."""
        sizes = [self.sizes[name] for name in self.factor_names]
        grids = np.indices(sizes).reshape(len(sizes), -1).T
        return grids.astype(np.int64)


@dataclass(frozen=True, eq=False)
class IndicatorMatrix:
    """Matriz indicadora n × u_t de un estrato."""

    entries: np.ndarray
    stratum: Stratum

    @property
    def labels(self) -> np.ndarray:
        return np.argmax(self.entries, axis=1)


__all__ = [
    "MEAN_LABEL",
    "TOP_NODE",
    "UnitFactorNode",
    "Stratum",
    "UnitStructure",
    "IndicatorMatrix",
]
