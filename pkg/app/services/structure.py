"""
Servicio de estructuras de unidades: estratos, indicadoras, proyectores y grados de libertad.
"""
from __future__ import annotations

from functools import lru_cache
from itertools import product
from typing import Dict, FrozenSet, List, Set, Tuple

import numpy as np

from app.core.logging import get_logger
from app.models.errors import StructureError
from app.models.structure import (
    MEAN_LABEL,
    TOP_NODE,
    IndicatorMatrix,
    Stratum,
    UnitFactorNode,
    UnitStructure,
)
from app.services.formula_parser import (
    BinaryNode,
    FactorLeaf,
    FormulaNode,
    iter_leaves,
    parse_formula,
    render_formula,
)


logger = get_logger("services.structure")

_StrataSet = Set[FrozenSet[str]]


def _closure(node: FormulaNode) -> Tuple[_StrataSet, FrozenSet[str]]:
    """Cierre de marginalidad: conjuntos de factores que forman estratos, y el conjunto completo."""
    if isinstance(node, FactorLeaf):
        top = frozenset({node.name})
        return {frozenset(), top}, top
    left, left_top = _closure(node.left)
    right, right_top = _closure(node.right)
    if node.op == "*":
        strata = {s | t for s in left for t in right}
    else:
        strata = set(left) | {left_top | t for t in right if t}
    return strata, left_top | right_top


def _collect_nodes(node: FormulaNode, parents: FrozenSet[str], out: List[UnitFactorNode]) -> FrozenSet[str]:
    if isinstance(node, FactorLeaf):
        out.append(UnitFactorNode(node.name, node.size, parents or frozenset({TOP_NODE})))
        return frozenset({node.name})
    left_top = _collect_nodes(node.left, parents, out)
    inner = left_top if node.op == "/" else parents
    right_top = _collect_nodes(node.right, inner, out)
    return left_top | right_top


def parse_structure(formula: str) -> UnitStructure:
    """
    Analiza una fórmula de unidades y deriva todos sus estratos.

    Raises:
        FormulaSyntaxError: fórmula mal formada (con posición).
        StructureError: factor duplicado o tamaño < 2.
    """
    tree = parse_formula(formula)
    leaves = list(iter_leaves(tree))

    seen: Dict[str, FactorLeaf] = {}
    for leaf in leaves:
        if leaf.name in seen or leaf.name in (TOP_NODE, MEAN_LABEL):
            raise StructureError(f"Factor de unidades duplicado o reservado: {leaf.name!r} (posición {leaf.position})")
        if leaf.size < 2:
            raise StructureError(f"El factor {leaf.name!r} debe tener tamaño >= 2 (posición {leaf.position})")
        seen[leaf.name] = leaf

    order = {leaf.name: i for i, leaf in enumerate(leaves)}
    sizes = {leaf.name: leaf.size for leaf in leaves}

    nodes: List[UnitFactorNode] = [UnitFactorNode(TOP_NODE, 1, frozenset())]
    _collect_nodes(tree, frozenset(), nodes)

    strata_sets, _ = _closure(tree)
    sorted_sets = sorted(strata_sets, key=lambda s: (len(s), sorted(order[f] for f in s)))

    df_by_set: Dict[FrozenSet[str], int] = {}
    strata: List[Stratum] = []
    for s in sorted_sets:
        factors = tuple(sorted(s, key=order.__getitem__))
        units = int(np.prod([sizes[f] for f in factors])) if factors else 1
        coarser = [w for w in df_by_set if w < s]
        df = units - sum(df_by_set[w] for w in coarser)
        df_by_set[s] = df
        label = ".".join(factors) if factors else MEAN_LABEL
        covered = frozenset().union(*coarser) if coarser else frozenset()
        fresh = [f for f in factors if f not in covered]
        name = ".".join(fresh) if fresh and factors else label
        strata.append(Stratum(label=label, factors=factors, units=units, df=df, name=name))

    # los nombres abreviados deben ser únicos; si chocan se usa la etiqueta completa
    labels = {s.label for s in strata}
    final: List[Stratum] = []
    names_seen: Set[str] = set()
    for s in strata:
        name = s.name
        if name != s.label and (name in labels or name in names_seen):
            name = s.label
        names_seen.add(name)
        final.append(Stratum(s.label, s.factors, s.units, s.df, name))

    n = int(np.prod(list(sizes.values())))
    structure = UnitStructure(formula=formula, nodes=tuple(nodes), strata=tuple(final), n=n, tree=tree)
    logger.debug(
        "Estructura analizada",
        extra={"formula": formula, "n": n, "strata": [s.label for s in final]},
    )
    return structure


def render_structure(structure: UnitStructure) -> str:
    """Render canónico de la fórmula; parse(render(s)) reproduce la misma estructura."""
    return render_formula(structure.tree)  # type: ignore[arg-type]


def _resolve(structure: UnitStructure, stratum: "Stratum | str") -> Stratum:
    if isinstance(stratum, str):
        return structure.stratum(stratum)
    if stratum not in structure.strata:
        raise StructureError(f"El estrato {stratum.label!r} no pertenece a la estructura")
    return stratum


def stratum_unit_levels(structure: UnitStructure, stratum: "Stratum | str") -> np.ndarray:
    """Índices de nivel de las unidades del estrato (u_t × |factores|), orden lexicográfico."""
    stratum = _resolve(structure, stratum)
    sizes = structure.sizes
    dims = [sizes[f] for f in stratum.factors]
    if not dims:
        return np.zeros((1, 0), dtype=np.int64)
    return np.array(list(product(*(range(d) for d in dims))), dtype=np.int64)


def unit_map(structure: UnitStructure, finer: "Stratum | str", coarser: "Stratum | str") -> np.ndarray:
    """
    Mapa de replicación: para cada unidad de `finer`, el índice de su unidad en `coarser`.
    """
    finer = _resolve(structure, finer)
    coarser = _resolve(structure, coarser)
    if not finer.contains(coarser):
        raise StructureError(f"{coarser.label!r} no es más grueso que {finer.label!r}")
    levels = stratum_unit_levels(structure, finer)
    if coarser.is_mean:
        return np.zeros(levels.shape[0], dtype=np.int64)
    cols = [finer.factors.index(f) for f in coarser.factors]
    sizes = structure.sizes
    return np.ravel_multi_index(levels[:, cols].T, [sizes[f] for f in coarser.factors]).astype(np.int64)


def unit_indicator(structure: UnitStructure, stratum: "Stratum | str") -> IndicatorMatrix:
    """Indicadora n × u_t de las unidades observacionales en el estrato."""
    stratum = _resolve(structure, stratum)
    labels = unit_map(structure, structure.bottom, stratum)
    entries = np.zeros((structure.n, stratum.units))
    entries[np.arange(structure.n), labels] = 1.0
    return IndicatorMatrix(entries=entries, stratum=stratum)


@lru_cache(maxsize=16)
def _projectors(structure: UnitStructure) -> Dict[str, np.ndarray]:
    projectors: Dict[str, np.ndarray] = {}
    for stratum in structure.strata:
        z = unit_indicator(structure, stratum).entries
        # Z'Z = (n/u_t) I en una estructura ortogonal simple
        averaging = (z @ z.T) * (stratum.units / structure.n)
        for coarser in structure.strata:
            if stratum.strictly_contains(coarser):
                averaging = averaging - projectors[coarser.label]
        projectors[stratum.label] = (averaging + averaging.T) / 2.0
    return projectors


def stratum_projector(structure: UnitStructure, stratum: "Stratum | str") -> np.ndarray:
    """S_t = A_t − Σ_{w ⊊ t} S_w, simétrico e idempotente con traza df(t)."""
    stratum = _resolve(structure, stratum)
    return _projectors(structure)[stratum.label].copy()


def stratum_df(structure: UnitStructure) -> Dict[str, int]:
    """Grados de libertad por estrato a partir de las trazas de los proyectores."""
    result: Dict[str, int] = {}
    projectors = _projectors(structure)
    for stratum in structure.strata:
        df = int(round(float(np.trace(projectors[stratum.label]))))
        if df != stratum.df:
            logger.warning(
                "Traza del proyector distinta de la recursión de Hasse",
                extra={"stratum": stratum.label, "trace_df": df, "hasse_df": stratum.df},
            )
        result[stratum.label] = df
    return result


def hasse_edges(structure: UnitStructure) -> List[Tuple[str, str]]:
    """Relaciones de cobertura (más grueso, más fino) entre estratos."""
    edges: List[Tuple[str, str]] = []
    for finer in structure.strata:
        below = [c for c in structure.strata if finer.strictly_contains(c)]
        for coarse in below:
            between = any(
                mid.strictly_contains(coarse) and finer.strictly_contains(mid) for mid in below
            )
            if not between:
                edges.append((coarse.label, finer.label))
    return edges


def render_hasse(structure: UnitStructure) -> str:
    """Representación textual del diagrama de Hasse de estratos."""
    edges = hasse_edges(structure)
    lines = [f"{render_structure(structure)}  (n={structure.n})"]
    for stratum in structure.strata:
        covers = [c for c, f in edges if f == stratum.label]
        tail = f"  <- {', '.join(covers)}" if covers else ""
        lines.append(f"{stratum.label:<32} u={stratum.units:<5} df={stratum.df:<5}{tail}")
    return "\n".join(lines)


__all__ = [
    "parse_structure",
    "render_structure",
    "stratum_unit_levels",
    "unit_map",
    "unit_indicator",
    "stratum_projector",
    "stratum_df",
    "hasse_edges",
    "render_hasse",
]
