"""
Búsqueda por intercambio de puntos, estrato a estrato, con arranques múltiples en paralelo.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from app.core.logging import get_logger
from app.models.criteria import BlockingScheme, CriterionValue
from app.models.errors import InfeasibleStartError
from app.models.search import (
    CandidateSet,
    ConstructionPlan,
    ConstructionResult,
    ExchangeResult,
    InterchangeResult,
    PlanEntry,
    SearchConfig,
    StratumDesign,
    StratumReport,
)
from app.services.criteria import CriterionEvaluator
from app.services.planning import expand_levels
from app.services.structure import unit_map


logger = get_logger("services.search")

_KEY_EPS = 1e-12

Key = Tuple[float, int, float]


def _improves(new: Key, old: Key) -> bool:
    """Orden lexicográfico (log v, d, logdet) con tolerancia para el ruido de redondeo."""
    for a, b in zip(new, old):
        if a == b or (math.isfinite(a) and math.isfinite(b) and abs(a - b) <= _KEY_EPS * max(1.0, abs(b))):
            continue
        return a > b
    return False


def _points(inherited: np.ndarray, levels: np.ndarray) -> np.ndarray:
    return np.column_stack([inherited, levels])


def random_initial_design(
    cands: CandidateSet,
    m: int,
    evaluator: CriterionEvaluator,
    rng: np.random.Generator,
    retry_cap: int = 1000,
    inherited: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Muestrea m filas candidatas con reemplazo hasta que X'QX sea no singular.

    Raises:
        InfeasibleStartError: si se agotan los `retry_cap` intentos.
    """
    inherited = np.zeros((m, 0)) if inherited is None else inherited
    for attempt in range(1, retry_cap + 1):
        levels = cands.points[rng.integers(0, cands.size, size=m)]
        evaluator.set_design(_points(inherited, levels))
        if not evaluator.evaluate().singular:
            logger.debug("Arranque no singular", extra={"stratum": evaluator.label, "attempts": attempt})
            return levels
    raise InfeasibleStartError(
        evaluator.label or "?", retry_cap, f"m={m}, p={evaluator.q + 1}, candidatos={cands.size}"
    )


def point_exchange(
    levels: np.ndarray,
    cands: CandidateSet,
    evaluator: CriterionEvaluator,
    config: SearchConfig,
    inherited: Optional[np.ndarray] = None,
) -> ExchangeResult:
    """
    Intercambio de puntos: en cada pasada se visita cada fila y se evalúan todos los
    candidatos; se aplica la mejor mejora estricta (o la primera, según la política).
    """
    m = levels.shape[0]
    inherited = np.zeros((m, 0)) if inherited is None else inherited
    evaluator.set_design(_points(inherited, levels))
    current = evaluator.evaluate()
    trajectory = [current.value]
    cache: Dict[bytes, Tuple[np.ndarray, np.ndarray]] = {}
    passes = 0

    for passes in range(1, config.max_passes + 1):
        start = current
        for i in range(m):
            key = inherited[i].tobytes()
            if key not in cache:
                rows = _points(np.repeat(inherited[i : i + 1], cands.size, axis=0), cands.points)
                cache[key] = (rows, evaluator.model_rows(rows))
            rows, x_rows = cache[key]
            log_values, ds, logdets = evaluator.exchange_keys(i, rows, x_rows)
            chosen = _select(log_values, ds, logdets, current.key, config.policy)
            if chosen is not None:
                evaluator.apply(i, rows[chosen])
                current = evaluator.evaluate()
        trajectory.append(current.value)
        logger.debug(
            "Pasada de intercambio",
            extra={"stratum": evaluator.label, "pass": passes, "value": current.value, "d": current.d},
        )
        if not _improves(current.key, start.key):
            break
        if math.isfinite(start.log_value) and current.log_value - start.log_value < math.log1p(config.tolerance):
            break

    own = evaluator.points[:, inherited.shape[1] :].copy()
    return ExchangeResult(levels=own, value=current, trajectory=tuple(trajectory), passes=passes)


def _select(
    log_values: np.ndarray, ds: np.ndarray, logdets: np.ndarray, current: Key, policy: str
) -> Optional[int]:
    if policy == "first":
        for k in range(log_values.size):
            if _improves((log_values[k], int(ds[k]), logdets[k]), current):
                return k
        return None
    order = np.lexsort((logdets, ds, log_values))
    best = int(order[-1])
    if _improves((log_values[best], int(ds[best]), logdets[best]), current):
        return best
    return None


def constrained_interchange(
    levels: np.ndarray,
    inherited: np.ndarray,
    cells: np.ndarray,
    groups: np.ndarray,
    evaluator: CriterionEvaluator,
    max_swaps: int = 1000,
) -> InterchangeResult:
    """
    Intercambia las filas propias de dos celdas de grupos distintos cuyas filas
    heredadas son idénticas; se aplica repetidamente la mejor mejora estricta.
    """
    levels = levels.copy()
    members: Dict[int, np.ndarray] = {int(c): np.flatnonzero(cells == c) for c in np.unique(cells)}
    group_of = {c: int(groups[idx[0]]) for c, idx in members.items()}
    ids = sorted(members)
    pairs = [
        (a, b)
        for pos, a in enumerate(ids)
        for b in ids[pos + 1 :]
        if group_of[a] != group_of[b]
        and members[a].size == members[b].size
        and np.array_equal(inherited[members[a]], inherited[members[b]])
    ]
    before = evaluator.evaluate_points(_points(inherited, levels))
    current = before
    swaps = 0
    while pairs and swaps < max_swaps:
        best_value: Optional[CriterionValue] = None
        best_pair = None
        for a, b in pairs:
            ia, ib = members[a], members[b]
            if np.array_equal(levels[ia], levels[ib]):
                continue
            trial = levels.copy()
            trial[ia], trial[ib] = levels[ib], levels[ia]
            value = evaluator.evaluate_points(_points(inherited, trial))
            reference = best_value.key if best_value is not None else current.key
            if _improves(value.key, reference):
                best_value, best_pair = value, (a, b)
        if best_pair is None:
            break
        ia, ib = members[best_pair[0]], members[best_pair[1]]
        levels[ia], levels[ib] = levels[ib].copy(), levels[ia].copy()
        current = best_value
        swaps += 1
    logger.debug(
        "Intercambio restringido",
        extra={"pairs": len(pairs), "swaps": swaps, "before": before.value, "after": current.value},
    )
    return InterchangeResult(levels=levels, before=before, after=current, swaps=swaps)


@dataclass
class _StartOutcome:
    index: int
    design: np.ndarray
    reports: List[StratumReport]
    key: Key
    interchange_value: float
    stratum_designs: List[StratumDesign]


def _interchange_evaluator(plan: ConstructionPlan, entry: PlanEntry) -> Tuple[CriterionEvaluator, np.ndarray, np.ndarray]:
    spec = entry.interchange
    structure = plan.structure
    cells = unit_map(structure, entry.stratum, spec.cells)
    groups = unit_map(structure, entry.stratum, spec.groups)
    scheme = BlockingScheme.from_labels([groups], [spec.groups])
    evaluator = CriterionEvaluator(
        scheme,
        entry.full_spec,
        plan.weights[entry.stratum.label],
        entry.inherited_names + entry.factor_names,
        label=f"{entry.stratum.label}/{spec.cells}",
    )
    return evaluator, cells, groups


def _run_start(plan: ConstructionPlan, config: SearchConfig, index: int, seed: np.random.SeedSequence) -> _StartOutcome:
    rng = np.random.default_rng(seed)
    levels: Dict[str, np.ndarray] = {}
    reports: List[StratumReport] = []
    designs: List[StratumDesign] = []
    interchange_value = -math.inf

    for entry in plan.entries:
        label = entry.stratum.label
        cands = plan.candidates[label]
        inherited = expand_levels(entry, levels, plan)
        evaluator = CriterionEvaluator(
            entry.scheme,
            entry.spec,
            plan.weights[label],
            entry.inherited_names + entry.factor_names,
            label=label,
        )
        start = random_initial_design(cands, entry.stratum.units, evaluator, rng, config.retry_cap, inherited)
        result = point_exchange(start, cands, evaluator, config, inherited)
        own = result.levels
        before = after = None
        if entry.interchange is not None:
            ic_eval, cells, groups = _interchange_evaluator(plan, entry)
            swapped = constrained_interchange(own, inherited, cells, groups, ic_eval)
            own = swapped.levels
            before, after = swapped.before.value, swapped.after.value
            interchange_value = swapped.after.log_value
            evaluator.set_design(_points(inherited, own))
        levels[label] = own
        designs.append(StratumDesign(own, entry.factor_names, inherited, entry.inherited_names, entry.stratum))
        value = evaluator.evaluate()
        reports.append(
            StratumReport(
                stratum=label,
                m=entry.stratum.units,
                p=entry.spec.p,
                scheme=entry.scheme.describe(),
                value=value,
                components=evaluator.components(),
                trajectory=result.trajectory,
                interchange_before=before,
                interchange_after=after,
            )
        )

    design = assemble_design(plan, levels)
    logger.debug("Arranque terminado", extra={"start": index, "value": reports[-1].value.value})
    return _StartOutcome(index, design, reports, reports[-1].value.key, interchange_value, designs)


def assemble_design(plan: ConstructionPlan, levels: Dict[str, np.ndarray]) -> np.ndarray:
    """Diseño n × factores a partir de los niveles de cada estrato (orden canónico de unidades)."""
    structure = plan.structure
    columns = []
    for factor in plan.factors:
        owner = next(e for e in plan.entries if factor.name in e.factor_names)
        mapping = unit_map(structure, structure.bottom, owner.stratum)
        columns.append(levels[owner.stratum.label][mapping, owner.factor_names.index(factor.name)])
    return np.column_stack(columns)


def _better(candidate: _StartOutcome, best: Optional[_StartOutcome]) -> bool:
    if best is None:
        return True
    if _improves(candidate.key, best.key):
        return True
    if _improves(best.key, candidate.key):
        return False
    if candidate.interchange_value != best.interchange_value:
        return candidate.interchange_value > best.interchange_value
    return tuple(candidate.design.ravel()) < tuple(best.design.ravel())


def construct_multistratum(plan: ConstructionPlan, config: SearchConfig) -> ConstructionResult:
    """
    Ejecuta `n_starts` cadenas completas del plan con semillas independientes y
    devuelve el mejor diseño según el criterio del último paso.
    """
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_starts)
    logger.info(
        "Construcción iniciada",
        extra={"starts": config.n_starts, "seed": config.seed, "jobs": config.n_jobs, "policy": config.policy},
    )
    outcomes = Parallel(n_jobs=config.n_jobs)(
        delayed(_run_start)(plan, config, i, seed) for i, seed in enumerate(seeds)
    )
    best: Optional[_StartOutcome] = None
    for outcome in outcomes:
        if _better(outcome, best):
            best = outcome
    assert best is not None
    logger.info(
        "Mejor diseño elegido",
        extra={
            "start": best.index,
            "value": best.reports[-1].value.value,
            "pure_error_df": best.reports[-1].value.d,
        },
    )
    return ConstructionResult(
        design=best.design,
        factor_names=tuple(f.name for f in plan.factors),
        reports=tuple(best.reports),
        start_index=best.index,
        seed=config.seed,
        n_starts=config.n_starts,
        start_values=tuple(o.reports[-1].value.value for o in outcomes),
        stratum_designs=tuple(best.stratum_designs),
    )


__all__ = [
    "random_initial_design",
    "point_exchange",
    "constrained_interchange",
    "assemble_design",
    "construct_multistratum",
]
