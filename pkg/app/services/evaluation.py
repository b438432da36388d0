"""
Evaluación de diseños completos: información bajo el modelo mixto, eficiencias
relativas D_S/A_S y tablas ANOVA esqueleto.
"""
from __future__ import annotations

import math
from itertools import product
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from app.core.logging import get_logger
from app.models.errors import ModelSpecError, NumericalError, StructureError
from app.models.evaluation import (
    AnovaRow,
    EfficiencyRow,
    EfficiencyTable,
    MixedModelContext,
    SkeletonAnova,
)
from app.models.model import Factor, TermSpec
from app.models.structure import Stratum, UnitStructure
from app.services import numkernel
from app.services.model_matrix import build_model_matrix, build_treatment_indicator, factor_home, term_home
from app.services.structure import stratum_projector, unit_indicator


logger = get_logger("services.evaluation")

DesignData = Tuple[np.ndarray, Sequence[str]]


def _eta_for(structure: UnitStructure, eta: Mapping[str, float]) -> Dict[str, float]:
    """Normaliza las claves de η a etiquetas de estrato y comprueba que estén todas."""
    resolved: Dict[str, float] = {}
    for key, value in eta.items():
        stratum = structure.stratum(key)
        if stratum not in structure.random_strata:
            raise StructureError(f"{key!r} no es un estrato aleatorio de bloqueo")
        if value < 0 or not math.isfinite(value):
            raise NumericalError(f"η inválido para {key}: {value}")
        resolved[stratum.label] = float(value)
    missing = [s.label for s in structure.random_strata if s.label not in resolved]
    if missing:
        raise StructureError(f"Faltan valores de η para: {', '.join(missing)}")
    return resolved


def mixed_model_context(structure: UnitStructure, eta: Mapping[str, float]) -> MixedModelContext:
    """V = I + Σ η_t Z_t Z_t' sobre los estratos aleatorios (ni Mean ni el inferior)."""
    resolved = _eta_for(structure, eta)
    n = structure.n
    v = np.eye(n)
    blocks = []
    for stratum in structure.random_strata:
        z = unit_indicator(structure, stratum).entries
        v += resolved[stratum.label] * (z @ z.T)
        blocks.append(resolved[stratum.label] * np.eye(stratum.units))
    psi = linalg.block_diag(*blocks) if blocks else np.zeros((0, 0))
    return MixedModelContext(eta=resolved, psi=psi, V=v)


def _full_model(design: DesignData, spec: TermSpec) -> np.ndarray:
    x = build_model_matrix(design, spec).values
    return np.column_stack([np.ones(x.shape[0]), x])


def information_matrix(
    design: DesignData, spec: TermSpec, structure: UnitStructure, eta: Mapping[str, float]
) -> np.ndarray:
    """M = X'V⁻¹X con intercepto."""
    matrix = np.asarray(design[0], dtype=float)
    if matrix.shape[0] != structure.n:
        raise ModelSpecError(f"El diseño tiene {matrix.shape[0]} filas y la estructura {structure.n}")
    x = _full_model(design, spec)
    v = mixed_model_context(structure, eta).V
    try:
        factor = linalg.cho_factor(v, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("V no es definida positiva") from exc
    info = x.T @ linalg.cho_solve(factor, x)
    return (info + info.T) / 2.0


def _reduced(info: np.ndarray) -> np.ndarray:
    """Complemento de Schur que elimina el intercepto."""
    m11 = info[0, 0]
    m12 = info[0:1, 1:]
    reduced = info[1:, 1:] - (m12.T @ m12) / m11
    return (reduced + reduced.T) / 2.0


def relative_efficiency(
    design_a: DesignData,
    design_b: DesignData,
    spec: TermSpec,
    structure: UnitStructure,
    eta: Mapping[str, float],
    w_diag: Optional[np.ndarray] = None,
) -> Tuple[float, float]:
    """
    Eficiencias de A respecto a B, en %: D_S = 100(|M̃_A|/|M̃_B|)^{1/(p−1)} y
    A_S = 100 tr(W M̃_B⁻¹) / tr(W M̃_A⁻¹). Un M̃ singular produce 0.
    """
    reduced = [_reduced(information_matrix(d, spec, structure, eta)) for d in (design_a, design_b)]
    logdet, trace, singular = numkernel.spectral_summary(np.stack(reduced), w_diag, need_trace=True)
    q = reduced[0].shape[0]
    if singular[1]:
        raise NumericalError("La información del diseño de referencia es singular")
    if singular[0]:
        logger.warning("Información singular en el diseño evaluado; eficiencia 0", extra={"eta": dict(eta)})
        return 0.0, 0.0
    d_eff = 100.0 * math.exp((logdet[0] - logdet[1]) / q)
    a_eff = 100.0 * trace[1] / trace[0]
    return float(d_eff), float(a_eff)


def eta_grid_points(structure: UnitStructure, grid: Sequence[float]) -> List[Tuple[float, ...]]:
    """Rejilla completa con el primer estrato aleatorio variando más rápido."""
    k = len(structure.random_strata)
    return [tuple(reversed(point)) for point in product(grid, repeat=k)]


def efficiency_table(
    design_a: DesignData,
    design_b: DesignData,
    spec: TermSpec,
    structure: UnitStructure,
    eta_grid: Sequence[float] = (1.0, 10.0, 100.0),
    eta_points: Sequence[Sequence[float]] = (),
    w_diag: Optional[np.ndarray] = None,
    n_jobs: int = 1,
) -> EfficiencyTable:
    """Eficiencias relativas sobre una rejilla de η (o puntos explícitos), en paralelo."""
    strata = structure.random_strata
    points = [tuple(float(v) for v in p) for p in eta_points] or eta_grid_points(structure, eta_grid)
    for point in points:
        if len(point) != len(strata):
            raise StructureError(f"El punto η {point} no tiene {len(strata)} componentes")
    labels = tuple(s.label for s in strata)
    results = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(relative_efficiency)(design_a, design_b, spec, structure, dict(zip(labels, point)), w_diag)
        for point in points
    )
    rows = tuple(EfficiencyRow(point, d, a) for point, (d, a) in zip(points, results))
    logger.info("Tabla de eficiencias calculada", extra={"points": len(rows)})
    return EfficiencyTable(strata=tuple(s.name for s in strata), rows=rows)


def _column_scale(matrix: np.ndarray) -> float:
    if matrix.size == 0:
        return 1.0
    return max(float(np.max(np.linalg.norm(matrix, axis=0))), 1.0)


def _projected_rank(projector: Optional[np.ndarray], matrix: np.ndarray, scale: float) -> int:
    if projector is None or matrix.shape[1] == 0:
        return 0
    return numkernel.rank(projector @ matrix, scale=scale)


def treatment_sets(
    structure: UnitStructure, factors: Sequence[Factor], spec: TermSpec
) -> List[Tuple[Stratum, List[str], TermSpec]]:
    """Un conjunto por estrato hogar de factores o términos: (estrato, factores ⊆, términos propios)."""
    homes = {f.name: factor_home(structure, f) for f in factors}
    term_homes = {t.powers: term_home(t, structure, factors) for t in spec.terms}
    result = []
    for stratum in structure.strata:
        own_terms = tuple(t for t in spec.terms if term_homes[t.powers] == stratum)
        has_factor = any(h == stratum for h in homes.values())
        if not (has_factor or own_terms):
            continue
        names = [f.name for f in factors if stratum.contains(homes[f.name])]
        result.append((stratum, names, spec.restricted_to(own_terms)))
    return result


def skeleton_anova(
    design: DesignData, structure: UnitStructure, factors: Sequence[Factor], spec: TermSpec
) -> SkeletonAnova:
    """
    ANOVA esqueleto secuencial: los estratos se procesan del más fino al más grueso
    acumulando proyectores; cada conjunto de tratamientos aporta el incremento de
    rango que no explicaban los conjuntos anteriores.
    """
    matrix, names = np.asarray(design[0], dtype=float), tuple(design[1])
    if matrix.shape[0] != structure.n:
        raise ModelSpecError(f"El diseño tiene {matrix.shape[0]} filas y la estructura {structure.n}")
    index = {name: i for i, name in enumerate(names)}

    sets = treatment_sets(structure, factors, spec)
    t_mats, x_mats = [], []
    for _, set_names, set_spec in sets:
        missing = [n for n in set_names if n not in index]
        if missing:
            raise ModelSpecError(f"Columnas ausentes en el diseño: {', '.join(missing)}")
        cols = matrix[:, [index[n] for n in set_names]]
        t_mats.append(build_treatment_indicator(cols).values)
        x_mats.append(build_model_matrix((matrix, names), set_spec).values)

    cumulative = [np.column_stack(t_mats[: j + 1]) for j in range(len(sets))]
    with_model = [
        np.column_stack(t_mats[:j] + [x_mats[j]]) if x_mats[j].shape[1] else None for j in range(len(sets))
    ]

    rows: List[AnovaRow] = []
    f_prev: Optional[np.ndarray] = None
    per_stratum: Dict[str, List[AnovaRow]] = {}
    for stratum in reversed(structure.strata[1:]):
        projector = stratum_projector(structure, stratum)
        f_now = projector if f_prev is None else f_prev + projector
        stratum_rows: List[AnovaRow] = []
        previous_delta = 0
        for j, (home, _, _) in enumerate(sets):
            scale = _column_scale(cumulative[j])
            delta = _projected_rank(f_now, cumulative[j], scale) - _projected_rank(f_prev, cumulative[j], scale)
            contribution = delta - previous_delta
            set_name = home.name
            if home == stratum:
                model_df = 0
                if with_model[j] is not None:
                    mscale = _column_scale(with_model[j])
                    model_delta = _projected_rank(f_now, with_model[j], mscale) - _projected_rank(
                        f_prev, with_model[j], mscale
                    )
                    model_df = model_delta - previous_delta
                stratum_rows.append(AnovaRow(stratum.label, f"Treatments[{set_name}]", contribution, "treatment", home.label))
                stratum_rows.append(AnovaRow(stratum.label, f"Model[{set_name}]", model_df, "model", home.label))
                stratum_rows.append(
                    AnovaRow(stratum.label, f"Lack-of-Fit[{set_name}]", contribution - model_df, "treatment_lof", home.label)
                )
            elif contribution > 0:
                stratum_rows.append(AnovaRow(stratum.label, f"Lack-of-Fit[{set_name}]", contribution, "lack_of_fit", home.label))
            previous_delta = delta
        stratum_rows.append(AnovaRow(stratum.label, "Pure Error", stratum.df - previous_delta, "pure_error"))
        stratum_rows.append(AnovaRow(stratum.label, "Total", stratum.df, "total"))
        per_stratum[stratum.label] = stratum_rows
        f_prev = f_now

    for stratum in structure.strata[1:]:
        rows.extend(per_stratum[stratum.label])
    anova = SkeletonAnova(rows=tuple(rows), stratum_names={s.label: s.name for s in structure.strata})
    logger.debug("ANOVA esqueleto calculada", extra={"strata": len(per_stratum), "sets": len(sets)})
    return anova


__all__ = [
    "mixed_model_context",
    "information_matrix",
    "relative_efficiency",
    "eta_grid_points",
    "efficiency_table",
    "treatment_sets",
    "skeleton_anova",
]
