"""
Modelos de resultados de evaluación: contexto del modelo mixto, ANOVA esqueleto y eficiencias.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

ANOVA_KINDS = ("treatment", "model", "lack_of_fit", "treatment_lof", "pure_error", "total")


@dataclass(frozen=True, eq=False)
class MixedModelContext:
    """η por estrato aleatorio, Ψ* diagonal por bloques y V = ZΨ*Z' + I."""

    eta: Dict[str, float]
    psi: np.ndarray
    V: np.ndarray


@dataclass(frozen=True)
class AnovaRow:
    stratum: str
    source: str
    df: int
    kind: str
    treatment_set: Optional[str] = None


@dataclass(frozen=True)
class SkeletonAnova:
    """Tabla ANOVA esqueleto: grados de libertad por estrato y fuente."""

    rows: Tuple[AnovaRow, ...]
    stratum_names: Dict[str, str]

    def _matches(self, row: AnovaRow, stratum: str) -> bool:
        return stratum in (row.stratum, self.stratum_names.get(row.stratum))

    def value(self, stratum: str, kind: str, treatment_set: Optional[str] = None) -> int:
        """Suma de gl de las filas del estrato con ese tipo (y conjunto, si se indica)."""
        total = 0
        for row in self.rows:
            if not self._matches(row, stratum) or row.kind != kind:
                continue
            if treatment_set is not None and treatment_set not in (
                row.treatment_set,
                self.stratum_names.get(row.treatment_set or ""),
            ):
                continue
            total += row.df
        return total

    @property
    def grand_total(self) -> int:
        return sum(r.df for r in self.rows if r.kind == "total")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "stratum": r.stratum,
                    "source": r.source,
                    "df": r.df,
                    "kind": r.kind,
                    "treatment_set": r.treatment_set or "",
                }
                for r in self.rows
            ],
            columns=["stratum", "source", "df", "kind", "treatment_set"],
        )


@dataclass(frozen=True)
class EfficiencyRow:
    eta: Tuple[float, ...]
    d_efficiency: float
    a_efficiency: float


@dataclass(frozen=True)
class EfficiencyTable:
    """Eficiencias relativas D_S y A_S (en %) sobre una rejilla de η."""

    strata: Tuple[str, ...]
    rows: Tuple[EfficiencyRow, ...]

    def to_frame(self) -> pd.DataFrame:
        records: List[Dict[str, float]] = []
        for row in self.rows:
            record = {f"eta_{name}": value for name, value in zip(self.strata, row.eta)}
            record["D_S"] = row.d_efficiency
            record["A_S"] = row.a_efficiency
            records.append(record)
        columns = [f"eta_{name}" for name in self.strata] + ["D_S", "A_S"]
        return pd.DataFrame(records, columns=columns)


__all__ = [
    "ANOVA_KINDS",
    "MixedModelContext",
    "AnovaRow",
    "SkeletonAnova",
    "EfficiencyRow",
    "EfficiencyTable",
]
