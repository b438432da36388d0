"""
Modelos de datos del criterio compuesto: esquemas de bloqueo, pesos y valores.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from app.models.errors import CriterionError, StructureError
from app.models.model import ModelMatrix, TermSpec, TreatmentIndicator

SCHEME_KINDS = ("crd", "blocked", "row_column")
W_CONVENTIONS = ("identity", "quadratic")


@dataclass(frozen=True, eq=False)
class BlockingScheme:
    """Estructura de bloqueo efectiva de un estrato (CRD, bloques o filas × columnas)."""

    kind: str
    m: int
    labels: Tuple[np.ndarray, ...] = ()
    names: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in SCHEME_KINDS:
            raise CriterionError(f"Esquema de bloqueo desconocido: {self.kind!r}")
        expected = {"crd": 0, "blocked": 1}.get(self.kind)
        if expected is not None and len(self.labels) != expected:
            raise CriterionError(f"El esquema {self.kind} requiere {expected} indicadoras")
        if self.kind == "row_column" and len(self.labels) < 2:
            raise CriterionError("El esquema row_column requiere al menos dos indicadoras cruzadas")
        for lab in self.labels:
            if lab.shape != (self.m,):
                raise CriterionError(f"Etiquetas de bloque con forma {lab.shape}, se esperaba ({self.m},)")
        if self.kind == "row_column":
            self._check_balanced_crossing()

    def _check_balanced_crossing(self) -> None:
        """Cada par (fila, columna) de cada par de indicadoras aparece el mismo número de veces."""
        for i in range(len(self.labels)):
            for j in range(i + 1, len(self.labels)):
                _, rows = np.unique(self.labels[i], return_inverse=True)
                _, cols = np.unique(self.labels[j], return_inverse=True)
                counts = np.zeros((int(rows.max()) + 1, int(cols.max()) + 1), dtype=np.int64)
                np.add.at(counts, (rows, cols), 1)
                if counts.min() != counts.max():
                    raise StructureError(
                        f"Bloqueo cruzado no equilibrado entre {self._name(i)} y {self._name(j)}: "
                        f"réplicas por celda entre {counts.min()} y {counts.max()}"
                    )

    def _name(self, index: int) -> str:
        return self.names[index] if index < len(self.names) else f"indicadora {index}"

    @classmethod
    def crd(cls, m: int) -> "BlockingScheme":
        return cls("crd", m)

    @classmethod
    def from_labels(cls, labels: Sequence[np.ndarray], names: Sequence[str] = ()) -> "BlockingScheme":
        arrays = tuple(np.asarray(lab, dtype=np.int64).reshape(-1) for lab in labels)
        if not arrays:
            raise CriterionError("Se necesita al menos una etiqueta para un esquema con bloques")
        kind = "blocked" if len(arrays) == 1 else "row_column"
        return cls(kind, int(arrays[0].size), arrays, tuple(names))

    @property
    def indicators(self) -> Tuple[np.ndarray, ...]:
        """Matrices indicadoras m × b_k, una por factor de bloqueo."""
        result = []
        for lab in self.labels:
            _, inverse = np.unique(lab, return_inverse=True)
            z = np.zeros((self.m, int(inverse.max()) + 1))
            z[np.arange(self.m), inverse] = 1.0
            result.append(z)
        return tuple(result)

    def nuisance(self) -> np.ndarray:
        """[1 | Z_1 | Z_2 | ...], la matriz de efectos de bloque incluida la media."""
        return np.column_stack([np.ones(self.m), *self.indicators])

    def describe(self) -> str:
        if self.kind == "crd":
            return f"CRD(m={self.m})"
        sizes = "x".join(str(z.shape[1]) for z in self.indicators)
        return f"{self.kind}({sizes}, m={self.m})"


@dataclass(frozen=True)
class CriterionWeights:
    """Pesos κ del criterio compuesto, niveles α y convención de W para la traza."""

    kappa_d: float = 0.0
    kappa_dp: float = 0.0
    kappa_l: float = 0.0
    kappa_lp: float = 0.0
    kappa_df: float = 0.0
    alpha_dp: float = 0.05
    alpha_lp: float = 0.05
    w_convention: str = "identity"
    quadratic_weight: float = 0.25

    def __post_init__(self) -> None:
        kappas = self.kappas
        if any(k < 0 or not math.isfinite(k) for k in kappas.values()):
            raise CriterionError("Los pesos κ deben ser finitos y no negativos")
        if abs(sum(kappas.values()) - 1.0) > 1e-12:
            raise CriterionError(f"Los pesos κ deben sumar 1 (suman {sum(kappas.values())!r})")
        for alpha in (self.alpha_dp, self.alpha_lp):
            if not 0.0 < alpha < 1.0:
                raise CriterionError(f"α fuera de (0, 1): {alpha}")
        if self.w_convention not in W_CONVENTIONS:
            raise CriterionError(f"Convención de W desconocida: {self.w_convention!r}")
        if self.quadratic_weight <= 0:
            raise CriterionError("El peso de los términos cuadráticos debe ser positivo")

    @property
    def kappas(self) -> Dict[str, float]:
        return {
            "D": self.kappa_d,
            "DP": self.kappa_dp,
            "L": self.kappa_l,
            "LP": self.kappa_lp,
            "DF": self.kappa_df,
        }

    @property
    def needs_pure_error(self) -> bool:
        return self.kappa_dp + self.kappa_lp + self.kappa_df > 0

    @property
    def needs_trace(self) -> bool:
        return self.kappa_l + self.kappa_lp > 0

    @classmethod
    def from_mapping(cls, kappa: Dict[str, float], **kwargs) -> "CriterionWeights":
        keys = {"D": "kappa_d", "DP": "kappa_dp", "L": "kappa_l", "LP": "kappa_lp", "DF": "kappa_df"}
        unknown = set(kappa) - set(keys)
        if unknown:
            raise CriterionError(f"Componentes κ desconocidos: {', '.join(sorted(unknown))}")
        return cls(**{keys[k]: float(v) for k, v in kappa.items()}, **kwargs)

    def w_diagonal(self, spec: TermSpec) -> np.ndarray:
        """Diagonal de W sobre las columnas del modelo (sin intercepto)."""
        return w_diagonal(spec, self.w_convention, self.quadratic_weight)


def w_diagonal(spec: TermSpec, convention: str, quadratic_weight: float = 0.25) -> np.ndarray:
    weights = []
    for term in spec.terms:
        width = 1
        for name, _ in term.powers:
            factor = spec.factor(name)
            if factor.qualitative:
                width *= len(factor.levels) - 1
        is_quadratic = any(exp == 2 for _, exp in term.powers) and len(term.powers) == 1
        w = quadratic_weight if (convention == "quadratic" and is_quadratic) else 1.0
        weights.extend([w] * width)
    return np.asarray(weights, dtype=float)


@dataclass(frozen=True, eq=False)
class CriterionContext:
    """Todo lo necesario para evaluar el criterio en un estrato."""

    Q: np.ndarray
    X: ModelMatrix
    T: TreatmentIndicator
    spec: Optional[TermSpec] = None

    @property
    def m(self) -> int:
        return int(self.Q.shape[0])

    @property
    def p(self) -> int:
        return self.X.p


@dataclass(frozen=True)
class CriterionValue:
    """Valor del criterio con sus componentes; `key` ordena los diseños en la búsqueda."""

    value: float
    log_value: float
    singular: bool
    d: int
    logdet: float
    trace: float = float("nan")

    @property
    def key(self) -> Tuple[float, int, float]:
        return (self.log_value, self.d, self.logdet)

    def better_than(self, other: Optional["CriterionValue"]) -> bool:
        return other is None or self.key > other.key


@dataclass(frozen=True)
class CriterionComponents:
    """Componentes interpretables: D_S, A_S, d y grados de libertad de falta de ajuste."""

    d_value: float
    a_value: float
    pure_error_df: int
    lack_of_fit_df: int


__all__ = [
    "SCHEME_KINDS",
    "W_CONVENTIONS",
    "BlockingScheme",
    "CriterionWeights",
    "CriterionContext",
    "CriterionValue",
    "CriterionComponents",
    "w_diagonal",
]
