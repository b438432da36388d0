"""
Carga y validación de configuraciones de problemas en YAML.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml

from app.core.logging import get_logger
from app.models.config import EvaluationConfig, ModelConfig, ProblemConfig, TermListConfig
from app.models.criteria import W_CONVENTIONS, CriterionWeights
from app.models.errors import (
    ConfigError,
    ConfigValidationError,
    CriterionError,
    ModelSpecError,
    StructureError,
)
from app.models.model import Factor
from app.models.search import POLICIES, InterchangeSpec, SearchConfig
from app.services.model_matrix import CANNED_KINDS, build_term_spec
from app.services.structure import parse_structure


logger = get_logger("services.config_loader")

TOP_LEVEL_KEYS = {
    "name",
    "structure",
    "factors",
    "model",
    "candidates",
    "criterion",
    "search",
    "interchange",
    "evaluation",
}

_SEARCH_DEFAULTS = SearchConfig()


def _as_list(value: Any) -> List[Any]:
    if value is None:
        return []
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _section(block: Mapping[str, Any], key: str, path: str, errors: List[ConfigValidationError]) -> Mapping[str, Any]:
    """Subsección opcional que debe ser un mapa; si no lo es se anota el error y se devuelve {}."""
    value = block.get(key)
    if value is None:
        return {}
    if not isinstance(value, dict):
        errors.append(ConfigValidationError(path, "Debe ser un mapa", repr(value)))
        return {}
    return value


class ConfigLoaderService:
    """
    Lee un YAML de problema, valida cada sección acumulando errores y construye el
    ProblemConfig con referencias resueltas.
    """

    @staticmethod
    def read_yaml(path: Path) -> Dict[str, Any]:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = yaml.safe_load(fh)
        except FileNotFoundError as exc:
            raise ConfigError([ConfigValidationError("<archivo>", "No existe", str(path))], str(path)) from exc
        except yaml.YAMLError as exc:
            raise ConfigError([ConfigValidationError("<archivo>", f"YAML inválido: {exc}")], str(path)) from exc
        if not isinstance(data, dict):
            raise ConfigError([ConfigValidationError("<raíz>", "Se esperaba un mapa")], str(path))
        return data

    @staticmethod
    def validate_raw(raw: Mapping[str, Any]) -> Tuple[bool, List[ConfigValidationError]]:
        """
        Valida la forma del documento (claves, tipos y valores permitidos).

        Returns:
            Tupla (es_valido, lista_de_errores)
        """
        errors: List[ConfigValidationError] = []
        for key in raw:
            if key not in TOP_LEVEL_KEYS:
                errors.append(ConfigValidationError(key, "Clave desconocida"))
        for key in ("name", "structure", "factors"):
            if key not in raw:
                errors.append(ConfigValidationError(key, "Falta la clave requerida"))

        factors = raw.get("factors") or []
        if not isinstance(factors, list) or not factors:
            errors.append(ConfigValidationError("factors", "Debe ser una lista no vacía"))
            factors = []
        names = set()
        for i, item in enumerate(factors):
            path = f"factors[{i}]"
            if not isinstance(item, dict):
                errors.append(ConfigValidationError(path, "Debe ser un mapa"))
                continue
            for key in ("name", "levels", "stratum"):
                if key not in item:
                    errors.append(ConfigValidationError(f"{path}.{key}", "Falta la clave requerida"))
            name = item.get("name")
            if name in names:
                errors.append(ConfigValidationError(f"{path}.name", "Nombre de factor duplicado", str(name)))
            names.add(name)
            levels = item.get("levels")
            if levels is not None and (
                not isinstance(levels, list) or not all(isinstance(v, (int, float)) for v in levels)
            ):
                errors.append(ConfigValidationError(f"{path}.levels", "Debe ser una lista de números", str(levels)))

        model = _section(raw, "model", "model", errors)
        kind = model.get("kind", "second-order")
        if kind not in CANNED_KINDS:
            errors.append(ConfigValidationError("model.kind", f"Debe ser uno de {', '.join(CANNED_KINDS)}", str(kind)))
        for key, value in _section(model, "strata", "model.strata", errors).items():
            override = _section({key: value}, key, f"model.strata.{key}", errors)
            sub_kind = override.get("kind", "custom")
            if sub_kind not in CANNED_KINDS:
                errors.append(ConfigValidationError(f"model.strata.{key}.kind", "Tipo de modelo desconocido", str(sub_kind)))

        criterion = _section(raw, "criterion", "criterion", errors)
        _section(criterion, "kappa", "criterion.kappa", errors)
        weights = criterion.get("weights", "identity")
        if weights not in W_CONVENTIONS:
            errors.append(ConfigValidationError("criterion.weights", "Convención de W desconocida", str(weights)))
        for key, value in _section(criterion, "strata", "criterion.strata", errors).items():
            block = _section({key: value}, key, f"criterion.strata.{key}", errors)
            _section(block, "kappa", f"criterion.strata.{key}.kappa", errors)

        search = _section(raw, "search", "search", errors)
        if search.get("policy", "best") not in POLICIES:
            errors.append(ConfigValidationError("search.policy", "Política desconocida", str(search.get("policy"))))
        for key in ("starts", "max_passes", "retry_cap"):
            value = search.get(key)
            if value is not None and (not isinstance(value, int) or value < 1):
                errors.append(ConfigValidationError(f"search.{key}", "Debe ser un entero >= 1", str(value)))

        for i, item in enumerate(_as_list(raw.get("interchange"))):
            for key in ("after", "cells", "groups"):
                if not isinstance(item, dict) or key not in item:
                    errors.append(ConfigValidationError(f"interchange[{i}].{key}", "Falta la clave requerida"))

        _section(raw, "candidates", "candidates", errors)

        evaluation = _section(raw, "evaluation", "evaluation", errors)
        if evaluation.get("a_weights", "quadratic") not in W_CONVENTIONS:
            errors.append(
                ConfigValidationError("evaluation.a_weights", "Convención de W desconocida", str(evaluation.get("a_weights")))
            )
        return len(errors) == 0, errors

    @staticmethod
    def _weights(block: Mapping[str, Any], path: str, errors: List[ConfigValidationError]) -> Optional[CriterionWeights]:
        try:
            return CriterionWeights.from_mapping(
                dict(block.get("kappa") or {"D": 1.0}),
                alpha_dp=float(block.get("alpha_dp", 0.05)),
                alpha_lp=float(block.get("alpha_lp", 0.05)),
                w_convention=str(block.get("weights", "identity")),
                quadratic_weight=float(block.get("quadratic_weight", 0.25)),
            )
        except (CriterionError, TypeError, ValueError) as exc:
            errors.append(ConfigValidationError(path, str(exc)))
            return None

    @staticmethod
    def build(raw: Mapping[str, Any], source: Optional[Path] = None) -> ProblemConfig:
        """
        Construye el problema. Los errores de fórmula se propagan con su posición;
        el resto se acumulan en un único ConfigError.
        """
        ok, errors = ConfigLoaderService.validate_raw(raw)
        label = str(source) if source else ""
        if not ok:
            raise ConfigError(errors, label)

        structure = parse_structure(str(raw["structure"]))
        base_dir = source.parent if source else Path.cwd()

        factors: List[Factor] = []
        for i, item in enumerate(raw["factors"]):
            try:
                stratum = structure.stratum(str(item["stratum"]))
                if stratum.is_mean:
                    raise StructureError("Un factor no puede asignarse a Mean")
                factors.append(
                    Factor(
                        name=str(item["name"]),
                        stratum=stratum.label,
                        levels=tuple(float(v) for v in item["levels"]),
                        qualitative=bool(item.get("qualitative", False)),
                    )
                )
            except (StructureError, ModelSpecError) as exc:
                errors.append(ConfigValidationError(f"factors[{i}]", str(exc)))

        model_raw = raw.get("model") or {}
        overrides = {
            str(key): TermListConfig(
                kind=str((value or {}).get("kind", "custom")),
                terms=tuple(_as_list((value or {}).get("terms"))),
                exclude=tuple(_as_list((value or {}).get("exclude"))),
                extra=tuple(_as_list((value or {}).get("extra"))),
            )
            for key, value in (model_raw.get("strata") or {}).items()
        }
        model = ModelConfig(
            kind=str(model_raw.get("kind", "second-order")),
            terms=tuple(_as_list(model_raw.get("terms"))),
            exclude=tuple(_as_list(model_raw.get("exclude"))),
            extra=tuple(_as_list(model_raw.get("extra"))),
            strata=overrides,
        )
        if not errors:
            try:
                build_term_spec(model.kind, factors, model.terms, model.exclude, model.extra)
                for key in overrides:
                    structure.stratum(key)
            except (ModelSpecError, StructureError) as exc:
                errors.append(ConfigValidationError("model", str(exc)))

        criterion = raw.get("criterion") or {}
        weights = ConfigLoaderService._weights(criterion, "criterion", errors)
        stratum_weights: Dict[str, CriterionWeights] = {}
        for key, block in (criterion.get("strata") or {}).items():
            merged = {**{k: v for k, v in criterion.items() if k != "strata"}, **(block or {})}
            w = ConfigLoaderService._weights(merged, f"criterion.strata.{key}", errors)
            try:
                stratum = structure.stratum(str(key))
            except StructureError as exc:
                errors.append(ConfigValidationError(f"criterion.strata.{key}", str(exc)))
                continue
            if w is not None:
                stratum_weights[stratum.label] = w

        search_raw = raw.get("search") or {}
        search = _SEARCH_DEFAULTS
        try:
            search = SearchConfig(
                n_starts=int(search_raw.get("starts", _SEARCH_DEFAULTS.n_starts)),
                seed=int(search_raw.get("seed", _SEARCH_DEFAULTS.seed)),
                max_passes=int(search_raw.get("max_passes", _SEARCH_DEFAULTS.max_passes)),
                tolerance=float(search_raw.get("tolerance", _SEARCH_DEFAULTS.tolerance)),
                policy=str(search_raw.get("policy", _SEARCH_DEFAULTS.policy)),
                retry_cap=int(search_raw.get("retry_cap", _SEARCH_DEFAULTS.retry_cap)),
                n_jobs=int(search_raw.get("jobs", _SEARCH_DEFAULTS.n_jobs)),
            )
        except (TypeError, ValueError) as exc:
            errors.append(ConfigValidationError("search", str(exc)))

        interchanges = []
        for i, item in enumerate(_as_list(raw.get("interchange"))):
            try:
                for key in ("after", "cells", "groups"):
                    structure.stratum(str(item[key]))
                interchanges.append(InterchangeSpec(str(item["after"]), str(item["cells"]), str(item["groups"])))
            except StructureError as exc:
                errors.append(ConfigValidationError(f"interchange[{i}]", str(exc)))

        exclusions = []
        known = {f.name for f in factors}
        for i, item in enumerate(_as_list((raw.get("candidates") or {}).get("exclude"))):
            if not isinstance(item, dict) or not set(item) <= known:
                errors.append(ConfigValidationError(f"candidates.exclude[{i}]", "Factores desconocidos", str(item)))
                continue
            exclusions.append({str(k): float(v) for k, v in item.items()})

        evaluation = ConfigLoaderService._evaluation(raw.get("evaluation") or {}, structure, base_dir, errors)

        if errors or weights is None:
            raise ConfigError(errors, label)

        problem = ProblemConfig(
            name=str(raw["name"]),
            structure=structure,
            factors=tuple(factors),
            model=model,
            candidate_exclusions=tuple(exclusions),
            weights=weights,
            search=search,
            stratum_weights=stratum_weights,
            interchanges=tuple(interchanges),
            evaluation=evaluation,
            source=source,
        )
        logger.info(
            "Configuración cargada",
            extra={"problem": problem.name, "n": structure.n, "factors": list(problem.factor_names)},
        )
        return problem

    @staticmethod
    def _evaluation(
        block: Mapping[str, Any], structure, base_dir: Path, errors: List[ConfigValidationError]
    ) -> EvaluationConfig:
        k = len(structure.random_strata)
        points = []
        for i, point in enumerate(_as_list(block.get("eta_points"))):
            if not isinstance(point, list) or len(point) != k:
                errors.append(
                    ConfigValidationError(f"evaluation.eta_points[{i}]", f"Se esperaban {k} valores de η", str(point))
                )
                continue
            points.append(tuple(float(v) for v in point))
        reference = block.get("reference")
        ref_path = None
        if reference:
            ref_path = (base_dir / str(reference)).resolve()
            if not ref_path.exists():
                errors.append(ConfigValidationError("evaluation.reference", "No existe el archivo", str(ref_path)))
        return EvaluationConfig(
            eta_grid=tuple(float(v) for v in _as_list(block.get("eta_grid")) or (1.0, 10.0, 100.0)),
            eta_points=tuple(points),
            a_weights=str(block.get("a_weights", "quadratic")),
            quadratic_weight=float(block.get("quadratic_weight", 0.25)),
            reference=ref_path,
        )


def load_problem(path: str | Path) -> ProblemConfig:
    """Lee y construye un problema desde un archivo YAML."""
    source = Path(path).resolve()
    raw = ConfigLoaderService.read_yaml(source)
    return ConfigLoaderService.build(raw, source)


# Instancia global del servicio
_config_loader_service: Optional[ConfigLoaderService] = None


def get_config_loader_service() -> ConfigLoaderService:
    """Obtiene la instancia global del cargador de configuraciones."""
    global _config_loader_service
    if _config_loader_service is None:
        _config_loader_service = ConfigLoaderService()
    return _config_loader_service


__all__ = ["ConfigLoaderService", "load_problem", "get_config_loader_service", "TOP_LEVEL_KEYS"]
