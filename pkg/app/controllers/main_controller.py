"""
Controlador principal: coordina carga de configuración, construcción y evaluación
de diseños, y traduce los errores del dominio a códigos de salida.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from app.core.logging import get_logger
from app.core.resources import (
    EXIT_CONFIG_ERROR,
    EXIT_DIMENSION_MISMATCH,
    EXIT_INFEASIBLE,
)
from app.core.settings import get_settings
from app.models.config import ProblemConfig
from app.models.criteria import w_diagonal
from app.models.errors import (
    ConfigError,
    ConfigValidationError,
    CriterionError,
    DimensionMismatchError,
    EstratoError,
    FormulaSyntaxError,
    InfeasibleStartError,
    ModelSpecError,
    StructureError,
)
from app.models.evaluation import EfficiencyTable, SkeletonAnova
from app.models.search import ConstructionResult
from app.services import design_io
from app.services.config_loader import get_config_loader_service
from app.services.evaluation import efficiency_table, skeleton_anova
from app.services.planning import derive_plan, full_term_spec
from app.services.search import construct_multistratum
from app.services.structure import hasse_edges, parse_structure, render_hasse, stratum_df


logger = get_logger("controllers.main")

_EXIT_CODES = (
    (ConfigError, EXIT_CONFIG_ERROR),
    (FormulaSyntaxError, EXIT_CONFIG_ERROR),
    (StructureError, EXIT_CONFIG_ERROR),
    (ModelSpecError, EXIT_CONFIG_ERROR),
    (CriterionError, EXIT_CONFIG_ERROR),
    (InfeasibleStartError, EXIT_INFEASIBLE),
    (DimensionMismatchError, EXIT_DIMENSION_MISMATCH),
)


def exit_code_for(error: BaseException) -> int:
    """Código de salida estable asociado a una excepción del dominio."""
    for kind, code in _EXIT_CODES:
        if isinstance(error, kind):
            return code
    return EXIT_CONFIG_ERROR if isinstance(error, EstratoError) else 1


def parse_eta_spec(spec: str, n_random: int) -> Tuple[Tuple[float, ...], Tuple[Tuple[float, ...], ...]]:
    """
    "1,10,100" define la rejilla completa; "1:1;100:1" define puntos explícitos.

    Returns:
        Tupla (rejilla, puntos); solo una de las dos tiene contenido.
    """
    text = spec.strip()
    try:
        if ":" in text or ";" in text:
            points = tuple(tuple(float(v) for v in chunk.split(":")) for chunk in text.split(";") if chunk.strip())
            bad = [p for p in points if len(p) != n_random]
            if bad:
                raise StructureError(f"Cada punto η necesita {n_random} valores: {bad[0]}")
            return (), points
        grid = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise StructureError(f"Especificación de η inválida: {spec!r}") from exc
    if not grid:
        raise StructureError("La rejilla de η está vacía")
    return grid, ()


@dataclass
class RunOutput:
    """Resultado de una orden: tablas para mostrar y archivos escritos."""

    tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    files: List[Path] = field(default_factory=list)
    text: str = ""


class DesignController:
    """
    Coordina los servicios de configuración, búsqueda, evaluación y E/S.
    """

    def __init__(self) -> None:
        self.settings = get_settings()
        self.loader = get_config_loader_service()
        self.problem: Optional[ProblemConfig] = None
        self.last_result: Optional[ConstructionResult] = None

    def load(self, config_path: str | Path) -> ProblemConfig:
        source = Path(config_path).resolve()
        raw = self.loader.read_yaml(source)
        self.problem = self.loader.build(raw, source)
        return self.problem

    def output_dir(self, problem: ProblemConfig, out: Optional[str]) -> Path:
        return Path(out) if out else Path(self.settings.output_dir) / problem.name

    # ------------------------------------------------------------ construcción
    def construct(
        self,
        config_path: str | Path,
        starts: Optional[int] = None,
        seed: Optional[int] = None,
        jobs: Optional[int] = None,
        out: Optional[str] = None,
    ) -> RunOutput:
        """Construye el diseño y escribe design.csv, criterion_report.csv y anova.csv."""
        problem = self.load(config_path)
        overrides = {}
        if starts is not None:
            overrides["n_starts"] = int(starts)
        if seed is not None:
            overrides["seed"] = int(seed)
        overrides["n_jobs"] = int(jobs) if jobs is not None else self.settings.jobs
        search = dataclasses.replace(problem.search, **overrides)

        plan = derive_plan(problem)
        result = construct_multistratum(plan, search)
        self.last_result = result

        target = self.output_dir(problem, out)
        design = design_io.design_frame(problem.structure, result.design, result.factor_names)
        report = pd.DataFrame(result.report_rows())
        anova = self._anova(problem, result.design, result.factor_names)

        output = RunOutput(tables={"design": design, "criterion_report": report, "anova": anova.to_frame()})
        output.files.append(design_io.write_frame(design, target / "design.csv"))
        output.files.append(design_io.write_frame(report, target / "criterion_report.csv"))
        output.files.append(design_io.write_frame(anova.to_frame(), target / "anova.csv"))
        logger.info(
            "Construcción terminada",
            extra={"problem": problem.name, "out": str(target), "start": result.start_index},
        )
        return output

    # -------------------------------------------------------------- evaluación
    def _anova(self, problem: ProblemConfig, design: np.ndarray, names: Sequence[str]) -> SkeletonAnova:
        return skeleton_anova((design, names), problem.structure, problem.factors, full_term_spec(problem))

    def read_design(self, problem: ProblemConfig, path: str | Path) -> np.ndarray:
        return design_io.read_design(Path(path), problem.structure, problem.factor_names)

    def anova(self, config_path: str | Path, design_path: str | Path, out: Optional[str] = None) -> RunOutput:
        """ANOVA esqueleto de un diseño leído de CSV."""
        problem = self.load(config_path)
        design = self.read_design(problem, design_path)
        table = self._anova(problem, design, problem.factor_names).to_frame()
        output = RunOutput(tables={"anova": table})
        output.files.append(design_io.write_frame(table, self.output_dir(problem, out) / "anova.csv"))
        return output

    def compare(
        self,
        config_path: str | Path,
        design_path: str | Path,
        reference: Optional[str] = None,
        eta_spec: Optional[str] = None,
        out: Optional[str] = None,
    ) -> RunOutput:
        """Eficiencias D_S/A_S del diseño frente a la referencia sobre una rejilla de η."""
        problem = self.load(config_path)
        ref_path = Path(reference) if reference else problem.evaluation.reference
        if ref_path is None:
            raise ConfigError(
                [ConfigValidationError("evaluation.reference", "No hay diseño de referencia (--ref o evaluation.reference)")]
            )
        design = self.read_design(problem, design_path)
        ref = self.read_design(problem, ref_path)

        n_random = len(problem.structure.random_strata)
        if eta_spec:
            grid, points = parse_eta_spec(eta_spec, n_random)
        else:
            grid, points = problem.evaluation.eta_grid, problem.evaluation.eta_points
        spec = full_term_spec(problem)
        w = w_diagonal(spec, problem.evaluation.a_weights, problem.evaluation.quadratic_weight)
        table: EfficiencyTable = efficiency_table(
            (design, problem.factor_names),
            (ref, problem.factor_names),
            spec,
            problem.structure,
            eta_grid=grid or (1.0, 10.0, 100.0),
            eta_points=points,
            w_diag=w,
            n_jobs=self.settings.jobs,
        )
        frame = table.to_frame()
        output = RunOutput(tables={"efficiency": frame})
        output.files.append(design_io.write_frame(frame, self.output_dir(problem, out) / "efficiency.csv"))
        return output

    @staticmethod
    def parse(formula: str) -> RunOutput:
        """Estratos, línea de grados de libertad y aristas de Hasse de una fórmula."""
        structure = parse_structure(formula)
        dfs = stratum_df(structure)
        df_line = " ".join(str(dfs[s.label]) for s in structure.strata[1:])
        edges = "\n".join(f"{a} -> {b}" for a, b in hasse_edges(structure))
        text = f"{render_hasse(structure)}\n\ndf: {df_line}\n\n{edges}"
        frame = pd.DataFrame(
            [{"stratum": s.label, "name": s.name, "units": s.units, "df": dfs[s.label]} for s in structure.strata]
        )
        return RunOutput(tables={"strata": frame}, text=text)


# Instancia global del controlador
_design_controller: Optional[DesignController] = None


def get_design_controller() -> DesignController:
    """Obtiene la instancia global del controlador."""
    global _design_controller
    if _design_controller is None:
        _design_controller = DesignController()
    return _design_controller


__all__ = [
    "DesignController",
    "RunOutput",
    "exit_code_for",
    "parse_eta_spec",
    "get_design_controller",
]
