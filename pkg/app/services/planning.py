"""
Derivación automática del plan de construcción estrato por estrato.
"""
from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np

from app.core.logging import get_logger
from app.models.config import ProblemConfig, TermListConfig
from app.models.criteria import BlockingScheme
from app.models.errors import ModelSpecError, StructureError
from app.models.model import Term, TermSpec
from app.models.search import ConstructionPlan, InterchangeSpec, PlanEntry
from app.models.structure import Stratum, UnitStructure
from app.services.candidates import build_candidates
from app.services.model_matrix import build_term_spec, factor_home, term_home
from app.services.structure import unit_map


logger = get_logger("services.planning")


def full_term_spec(problem: ProblemConfig) -> TermSpec:
    """Modelo completo del problema sobre todos los factores."""
    model = problem.model
    return build_term_spec(model.kind, problem.factors, model.terms, model.exclude, model.extra)


def term_partition(problem: ProblemConfig, spec: Optional[TermSpec] = None) -> Dict[str, List[Term]]:
    """Agrupa los términos del modelo completo por su estrato hogar."""
    spec = spec or full_term_spec(problem)
    groups: Dict[str, List[Term]] = {}
    for term in spec.terms:
        home = term_home(term, problem.structure, problem.factors)
        groups.setdefault(home.label, []).append(term)
    return groups


def blocking_strata(structure: UnitStructure, stratum: Stratum) -> Tuple[Stratum, ...]:
    """Estratos maximales estrictamente más gruesos que `stratum`, sin contar Mean."""
    coarser = [s for s in structure.strata if not s.is_mean and stratum.strictly_contains(s)]
    maximal = [s for s in coarser if not any(o.strictly_contains(s) for o in coarser)]
    return tuple(maximal)


def blocking_scheme(structure: UnitStructure, stratum: Stratum) -> BlockingScheme:
    """Esquema de bloqueo inducido: CRD, bloques simples o bloqueo cruzado."""
    blockers = blocking_strata(structure, stratum)
    if not blockers:
        return BlockingScheme.crd(stratum.units)
    labels = [unit_map(structure, stratum, b) for b in blockers]
    return BlockingScheme.from_labels(labels, [b.label for b in blockers])


def _override_for(problem: ProblemConfig, stratum: Stratum) -> Optional[TermListConfig]:
    for key, value in problem.model.strata.items():
        if stratum.matches(key):
            return value
    return None


def derive_plan(problem: ProblemConfig) -> ConstructionPlan:
    """
    Un paso por cada estrato hogar de algún factor, en orden de estratos. Cada paso
    optimiza los términos cuyo hogar es su estrato, bloqueado por los estratos
    maximales más gruesos y con los diseños anteriores replicados.
    """
    structure = problem.structure
    homes: Dict[str, Stratum] = {}
    for factor in problem.factors:
        home = factor_home(structure, factor)
        if home.is_mean:
            raise ModelSpecError(f"El factor {factor.name!r} no puede asignarse al estrato Mean")
        homes[factor.name] = home

    spec = full_term_spec(problem)
    partition = term_partition(problem, spec)

    entries: List[PlanEntry] = []
    weights = {}
    candidates = {}
    for stratum in structure.strata:
        own = tuple(f for f in problem.factors if homes[f.name] == stratum)
        if not own:
            continue
        earlier = [e for e in entries if stratum.strictly_contains(e.stratum)]
        inherited = tuple(f for f in problem.factors if any(f in e.factors for e in earlier))
        available = inherited + own
        available_names = {f.name for f in available}

        override = _override_for(problem, stratum)
        if override is not None:
            entry_spec = build_term_spec(override.kind, available, override.terms, override.exclude, override.extra)
        else:
            entry_spec = TermSpec(available, tuple(partition.get(stratum.label, ())))
        if not entry_spec.terms:
            raise ModelSpecError(f"El estrato {stratum.label} no tiene términos que optimizar")

        full_terms = tuple(t for t in spec.terms if t.factors <= available_names)
        replication = {e.stratum.label: unit_map(structure, stratum, e.stratum) for e in earlier}
        entry = PlanEntry(
            stratum=stratum,
            factors=own,
            scheme=blocking_scheme(structure, stratum),
            replication=replication,
            spec=entry_spec,
            full_spec=TermSpec(available, full_terms),
            inherited_names=tuple(f.name for f in inherited),
        )
        entries.append(entry)
        weights[stratum.label] = problem.weights_for(stratum.label, stratum.name)
        candidates[stratum.label] = build_candidates(own, problem.candidate_exclusions)

    entries = _attach_interchanges(structure, entries, problem.interchanges)
    plan = ConstructionPlan(
        structure=structure,
        entries=tuple(entries),
        factors=problem.factors,
        weights=weights,
        candidates=candidates,
    )
    logger.info(
        "Plan derivado",
        extra={
            "problem": problem.name,
            "entries": [
                {"stratum": e.stratum.label, "m": e.stratum.units, "p": e.spec.p, "scheme": e.scheme.describe()}
                for e in plan.entries
            ],
        },
    )
    return plan


def _attach_interchanges(
    structure: UnitStructure, entries: List[PlanEntry], interchanges: Tuple[InterchangeSpec, ...]
) -> List[PlanEntry]:
    result = list(entries)
    for spec in interchanges:
        position = next((i for i, e in enumerate(result) if e.stratum.matches(spec.after)), None)
        if position is None:
            raise StructureError(f"El intercambio se refiere a un paso inexistente: {spec.after!r}")
        entry = result[position]
        cells = structure.stratum(spec.cells)
        groups = structure.stratum(spec.groups)
        if not (entry.stratum.contains(cells) and cells.strictly_contains(groups)):
            raise StructureError(
                f"Intercambio inválido: se requiere {groups.label} ⊊ {cells.label} ⊆ {entry.stratum.label}"
            )
        result[position] = PlanEntry(
            stratum=entry.stratum,
            factors=entry.factors,
            scheme=entry.scheme,
            replication=entry.replication,
            spec=entry.spec,
            full_spec=entry.full_spec,
            inherited_names=entry.inherited_names,
            interchange=InterchangeSpec(entry.stratum.label, cells.label, groups.label),
        )
    return result


def expand_levels(entry: PlanEntry, levels: Dict[str, np.ndarray], plan: ConstructionPlan) -> np.ndarray:
    """Columnas heredadas del paso: diseños anteriores replicados por el mapa de unidades."""
    columns = []
    for name in entry.inherited_names:
        owner = next(e for e in plan.entries if name in e.factor_names)
        col = owner.factor_names.index(name)
        columns.append(levels[owner.stratum.label][entry.replication[owner.stratum.label], col])
    if not columns:
        return np.zeros((entry.stratum.units, 0))
    return np.column_stack(columns)


__all__ = [
    "full_term_spec",
    "term_partition",
    "blocking_strata",
    "blocking_scheme",
    "derive_plan",
    "expand_levels",
]
