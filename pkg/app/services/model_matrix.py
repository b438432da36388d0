"""
Construcción de listas de términos, matrices del modelo e indicadoras de tratamientos.
"""
from __future__ import annotations

import re
from itertools import combinations
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np

from app.core.logging import get_logger
from app.models.errors import ModelSpecError
from app.models.model import Factor, ModelMatrix, Term, TermSpec, TreatmentIndicator
from app.models.structure import Stratum, UnitStructure


logger = get_logger("services.model_matrix")

CANNED_KINDS = ("second-order", "linear+2fi", "custom")

_POWER_RE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:\^\s*(\d+))?\s*$")

PointsLike = Union[Tuple[np.ndarray, Sequence[str]], object]


def parse_term(text: str, factors: Sequence[Factor]) -> Term:
    """Convierte "X1", "X1^2" o "X1*X2^2*X8" en un Term validado contra los factores."""
    known = {f.name for f in factors}
    powers: List[Tuple[str, int]] = []
    for chunk in text.split("*"):
        match = _POWER_RE.match(chunk)
        if match is None:
            raise ModelSpecError(f"Término mal formado: {text!r}")
        name, exp = match.group(1), int(match.group(2) or 1)
        if name not in known:
            raise ModelSpecError(f"Factor desconocido {name!r} en el término {text!r}")
        powers.append((name, exp))
    return Term(tuple(powers))


def _linear(factors: Sequence[Factor]) -> List[Term]:
    return [Term(((f.name, 1),)) for f in factors]


def _interactions(factors: Sequence[Factor]) -> List[Term]:
    return [Term(((a.name, 1), (b.name, 1))) for a, b in combinations(factors, 2)]


def second_order_terms(factors: Sequence[Factor]) -> TermSpec:
    """
    Modelo de segundo orden: lineales, cuadráticos puros e interacciones de dos factores.

    Solo los factores cuantitativos con >= 3 niveles reciben término cuadrático
    (con dos niveles X² coincide con el intercepto).
    Con k factores de los que k_q admiten cuadrático hay k + k_q + k(k−1)/2 términos,
    que es 2k + k(k−1)/2 solo si todos son cuantitativos de tres o más niveles. Un
    cualitativo de L niveles aporta L − 1 columnas por cada término en que aparece.
    """
    quadratic = [Term(((f.name, 2),)) for f in factors if f.supports_quadratic]
    terms = _linear(factors) + quadratic + _interactions(factors)
    return TermSpec(tuple(factors), tuple(terms))


def linear_2fi_terms(factors: Sequence[Factor]) -> TermSpec:
    """Efectos principales más todas las interacciones de dos factores."""
    return TermSpec(tuple(factors), tuple(_linear(factors) + _interactions(factors)))


def build_term_spec(
    kind: str,
    factors: Sequence[Factor],
    terms: Iterable[str] = (),
    exclude: Iterable[str] = (),
    extra: Iterable[str] = (),
) -> TermSpec:
    """Resuelve una especificación nombrada con sus listas de exclusión y extras."""
    if kind == "second-order":
        base = list(second_order_terms(factors).terms)
    elif kind == "linear+2fi":
        base = list(linear_2fi_terms(factors).terms)
    elif kind == "custom":
        base = [parse_term(t, factors) for t in terms]
    else:
        raise ModelSpecError(f"Tipo de modelo desconocido: {kind!r} (use {', '.join(CANNED_KINDS)})")

    removed = {parse_term(t, factors).powers for t in exclude}
    missing = removed - {t.powers for t in base}
    if missing:
        logger.warning(
            "Términos excluidos que no estaban en el modelo",
            extra={"terms": ["*".join(f"{n}^{e}" for n, e in m) for m in missing]},
        )
    result = [t for t in base if t.powers not in removed]
    for text in extra:
        term = parse_term(text, factors)
        if term.powers not in {t.powers for t in result}:
            result.append(term)
    return TermSpec(tuple(factors), tuple(result))


def factor_home(structure: UnitStructure, factor: Factor) -> Stratum:
    return structure.stratum(factor.stratum)


def term_home(term: Term, structure: UnitStructure, factors: Sequence[Factor]) -> Stratum:
    """
    Estrato hogar del término: el que tiene por constituyentes la unión de los
    constituyentes de los estratos hogar de sus factores.
    """
    by_name = {f.name: f for f in factors}
    union: set = set()
    for name in term.factors:
        if name not in by_name:
            raise ModelSpecError(f"Factor desconocido {name!r} en el término {term.text}")
        union |= set(factor_home(structure, by_name[name]).factors)
    stratum = structure.find_stratum(frozenset(union))
    if stratum is None:
        raise ModelSpecError(
            f"El término {term.text} combina estratos cuya unión {sorted(union)} no es un estrato"
        )
    return stratum


def _as_matrix(points: PointsLike) -> Tuple[np.ndarray, Tuple[str, ...]]:
    if isinstance(points, tuple):
        matrix, names = points
    else:
        matrix, names = points.points, points.point_names  # type: ignore[attr-defined]
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] != len(names):
        raise ModelSpecError("La matriz de puntos no coincide con los nombres de columna")
    return matrix, tuple(names)


def build_model_matrix(points: PointsLike, spec: TermSpec) -> ModelMatrix:
    """
    Evalúa los términos sobre los puntos: producto de nivel^exponente, con
    indicadoras de los niveles no base para factores cualitativos.
    """
    matrix, names = _as_matrix(points)
    index = {name: i for i, name in enumerate(names)}
    columns: List[np.ndarray] = []
    for term in spec.terms:
        pieces = [np.ones(matrix.shape[0])]
        for name, exp in term.powers:
            if name not in index:
                raise ModelSpecError(f"El factor {name!r} no está en los puntos del diseño")
            x = matrix[:, index[name]]
            factor = spec.factor(name)
            if factor.qualitative:
                blocks = [(x == level).astype(float) for level in factor.levels[1:]]
            else:
                blocks = [x**exp]
            pieces = [a * b for a in pieces for b in blocks]
        columns.extend(pieces)
    values = np.column_stack(columns) if columns else np.zeros((matrix.shape[0], 0))
    return ModelMatrix(values=values, labels=spec.columns, p=spec.p)


def build_treatment_indicator(points: Union[np.ndarray, PointsLike]) -> TreatmentIndicator:
    """Indicadora m × t con una columna por fila distinta, en orden de primera aparición."""
    if isinstance(points, np.ndarray):
        matrix = np.asarray(points, dtype=float)
    else:
        matrix, _ = _as_matrix(points)
    m = matrix.shape[0]
    if matrix.shape[1] == 0:
        return TreatmentIndicator(
            values=np.ones((m, 1)), labels=np.zeros(m, dtype=np.int64), combinations=np.zeros((1, 0))
        )
    uniques, first, inverse = np.unique(matrix, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    order = np.argsort(first, kind="stable")
    rank_of = np.empty_like(order)
    rank_of[order] = np.arange(order.size)
    labels = rank_of[inverse].astype(np.int64)
    values = np.zeros((m, order.size))
    values[np.arange(m), labels] = 1.0
    return TreatmentIndicator(values=values, labels=labels, combinations=uniques[order])


__all__ = [
    "CANNED_KINDS",
    "parse_term",
    "second_order_terms",
    "linear_2fi_terms",
    "build_term_spec",
    "factor_home",
    "term_home",
    "build_model_matrix",
    "build_treatment_indicator",
]
