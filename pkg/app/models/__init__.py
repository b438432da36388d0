"""
Modelos de datos (dataclasses y validadores) usados por la aplicación.
"""

from app.models.errors import (
    EstratoError,
    FormulaSyntaxError,
    StructureError,
    ModelSpecError,
    CriterionError,
    NumericalError,
    DimensionMismatchError,
    InfeasibleStartError,
    ConfigValidationError,
    ConfigError,
)
from app.models.structure import Stratum, UnitFactorNode, UnitStructure, IndicatorMatrix
from app.models.model import Factor, Term, TermSpec, ModelMatrix, TreatmentIndicator
from app.models.criteria import (
    BlockingScheme,
    CriterionWeights,
    CriterionContext,
    CriterionValue,
    CriterionComponents,
)
from app.models.search import (
    CandidateSet,
    StratumDesign,
    InterchangeSpec,
    PlanEntry,
    ConstructionPlan,
    SearchConfig,
    ConstructionResult,
)
from app.models.evaluation import MixedModelContext, SkeletonAnova, EfficiencyTable
from app.models.config import ProblemConfig, ModelConfig, EvaluationConfig

__all__ = [
    "EstratoError",
    "FormulaSyntaxError",
    "StructureError",
    "ModelSpecError",
    "CriterionError",
    "NumericalError",
    "DimensionMismatchError",
    "InfeasibleStartError",
    "ConfigValidationError",
    "ConfigError",
    "Stratum",
    "UnitFactorNode",
    "UnitStructure",
    "IndicatorMatrix",
    "Factor",
    "Term",
    "TermSpec",
    "ModelMatrix",
    "TreatmentIndicator",
    "BlockingScheme",
    "CriterionWeights",
    "CriterionContext",
    "CriterionValue",
    "CriterionComponents",
    "CandidateSet",
    "StratumDesign",
    "InterchangeSpec",
    "PlanEntry",
    "ConstructionPlan",
    "SearchConfig",
    "ConstructionResult",
    "MixedModelContext",
    "SkeletonAnova",
    "EfficiencyTable",
    "ProblemConfig",
    "ModelConfig",
    "EvaluationConfig",
]
