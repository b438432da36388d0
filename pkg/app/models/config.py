"""
Modelos de configuración de un problema de diseño (cargados desde YAML).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Mapping, Optional, Tuple

from app.models.criteria import CriterionWeights
from app.models.model import Factor
from app.models.search import InterchangeSpec, SearchConfig
from app.models.structure import UnitStructure


@dataclass(frozen=True)
class TermListConfig:
    """Modelo nombrado con listas de términos, exclusiones y extras."""

    kind: str = "second-order"
    terms: Tuple[str, ...] = ()
    exclude: Tuple[str, ...] = ()
    extra: Tuple[str, ...] = ()


@dataclass(frozen=True)
class ModelConfig(TermListConfig):
    # sustituciones por estrato (etiqueta o nombre -> lista de términos)
    strata: Mapping[str, TermListConfig] = field(default_factory=dict)


@dataclass(frozen=True)
class EvaluationConfig:
    eta_grid: Tuple[float, ...] = (1.0, 10.0, 100.0)
    eta_points: Tuple[Tuple[float, ...], ...] = ()
    a_weights: str = "quadratic"
    quadratic_weight: float = 0.25
    reference: Optional[Path] = None


@dataclass(frozen=True, eq=False)
class ProblemConfig:
    """Problema completo: estructura, factores, modelo, criterio y búsqueda."""

    name: str
    structure: UnitStructure
    factors: Tuple[Factor, ...]
    model: ModelConfig
    candidate_exclusions: Tuple[Dict[str, float], ...]
    weights: CriterionWeights
    search: SearchConfig
    stratum_weights: Mapping[str, CriterionWeights] = field(default_factory=dict)
    interchanges: Tuple[InterchangeSpec, ...] = ()
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    source: Optional[Path] = None

    @property
    def factor_names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    def weights_for(self, stratum_key: str, *aliases: str) -> CriterionWeights:
        for key in (stratum_key, *aliases):
            if key in self.stratum_weights:
                return self.stratum_weights[key]
        return self.weights


__all__ = ["TermListConfig", "ModelConfig", "EvaluationConfig", "ProblemConfig"]
