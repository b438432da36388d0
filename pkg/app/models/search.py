"""
Modelos de datos de la construcción por estratos: candidatos, diseños, plan y resultados.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np

from app.models.criteria import BlockingScheme, CriterionComponents, CriterionValue, CriterionWeights
from app.models.errors import ModelSpecError
from app.models.model import Factor, TermSpec
from app.models.structure import Stratum, UnitStructure

POLICIES = ("best", "first")


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Puntos candidatos de los factores propios de un estrato."""

    points: np.ndarray
    factor_names: Tuple[str, ...]
    provenance: str = ""

    @property
    def size(self) -> int:
        return int(self.points.shape[0])


@dataclass(frozen=True, eq=False)
class StratumDesign:
    """Diseño de un estrato: niveles propios más columnas heredadas congeladas."""

    levels: np.ndarray
    factor_names: Tuple[str, ...]
    inherited: np.ndarray
    inherited_names: Tuple[str, ...]
    stratum: Stratum

    def __post_init__(self) -> None:
        if self.levels.shape[0] != self.inherited.shape[0]:
            raise ModelSpecError("Filas propias y heredadas con longitudes distintas")

    @property
    def m(self) -> int:
        return int(self.levels.shape[0])

    @property
    def points(self) -> np.ndarray:
        return np.column_stack([self.inherited, self.levels])

    @property
    def point_names(self) -> Tuple[str, ...]:
        return self.inherited_names + self.factor_names


@dataclass(frozen=True)
class InterchangeSpec:
    """Paso posterior de intercambio de celdas entre grupos."""

    after: str
    cells: str
    groups: str


@dataclass(frozen=True, eq=False)
class PlanEntry:
    """Paso de construcción de un estrato."""

    stratum: Stratum
    factors: Tuple[Factor, ...]
    scheme: BlockingScheme
    replication: Mapping[str, np.ndarray]
    spec: TermSpec
    full_spec: TermSpec
    inherited_names: Tuple[str, ...] = ()
    interchange: Optional[InterchangeSpec] = None

    @property
    def factor_names(self) -> Tuple[str, ...]:
        return tuple(f.name for f in self.factors)


@dataclass(frozen=True, eq=False)
class ConstructionPlan:
    structure: UnitStructure
    entries: Tuple[PlanEntry, ...]
    factors: Tuple[Factor, ...]
    weights: Mapping[str, CriterionWeights]
    candidates: Mapping[str, CandidateSet]

    def entry(self, key: str) -> PlanEntry:
        for entry in self.entries:
            if entry.stratum.matches(key):
                return entry
        raise KeyError(key)


@dataclass(frozen=True)
class SearchConfig:
    n_starts: int = 1
    seed: int = 0
    max_passes: int = 50
    tolerance: float = 1e-9
    policy: str = "best"
    retry_cap: int = 1000
    n_jobs: int = -1

    def __post_init__(self) -> None:
        if self.n_starts < 1:
            raise ValueError("n_starts debe ser >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"Política desconocida: {self.policy!r}")
        if self.max_passes < 1 or self.retry_cap < 1:
            raise ValueError("max_passes y retry_cap deben ser >= 1")
        if self.tolerance < 0:
            raise ValueError("La tolerancia no puede ser negativa")


@dataclass(frozen=True, eq=False)
class ExchangeResult:
    levels: np.ndarray
    value: CriterionValue
    trajectory: Tuple[float, ...]
    passes: int


@dataclass(frozen=True, eq=False)
class InterchangeResult:
    levels: np.ndarray
    before: CriterionValue
    after: CriterionValue
    swaps: int


@dataclass(frozen=True, eq=False)
class StratumReport:
    """Resumen de un paso del plan en el mejor arranque."""

    stratum: str
    m: int
    p: int
    scheme: str
    value: CriterionValue
    components: CriterionComponents
    trajectory: Tuple[float, ...] = ()
    interchange_before: Optional[float] = None
    interchange_after: Optional[float] = None


@dataclass(frozen=True, eq=False)
class ConstructionResult:
    """Diseño completo elegido entre todos los arranques."""

    design: np.ndarray
    factor_names: Tuple[str, ...]
    reports: Tuple[StratumReport, ...]
    start_index: int
    seed: int
    n_starts: int
    start_values: Tuple[float, ...] = field(default=())
    stratum_designs: Tuple[StratumDesign, ...] = field(default=())

    @property
    def final_value(self) -> CriterionValue:
        return self.reports[-1].value

    def report_rows(self) -> List[Dict[str, object]]:
        rows = []
        for r in self.reports:
            rows.append(
                {
                    "stratum": r.stratum,
                    "m": r.m,
                    "p": r.p,
                    "scheme": r.scheme,
                    "criterion": r.value.value,
                    "pure_error_df": r.value.d,
                    "lack_of_fit_df": r.components.lack_of_fit_df,
                    "d_value": r.components.d_value,
                    "a_value": r.components.a_value,
                    "passes": max(len(r.trajectory) - 1, 0),
                    "interchange_before": r.interchange_before,
                    "interchange_after": r.interchange_after,
                }
            )
        return rows


__all__ = [
    "POLICIES",
    "CandidateSet",
    "StratumDesign",
    "InterchangeSpec",
    "PlanEntry",
    "ConstructionPlan",
    "SearchConfig",
    "ExchangeResult",
    "InterchangeResult",
    "StratumReport",
    "ConstructionResult",
]
