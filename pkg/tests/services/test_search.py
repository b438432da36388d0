"""
Tests para el intercambio de puntos, el intercambio restringido y la construcción multiestrato.
"""
import dataclasses
import itertools

import numpy as np
import pytest

from app.models.criteria import BlockingScheme, CriterionWeights
from app.models.errors import InfeasibleStartError
from app.models.model import Factor
from app.models.search import CandidateSet, SearchConfig
from app.services.config_loader import load_problem
from app.services.criteria import CriterionEvaluator
from app.services.model_matrix import second_order_terms
from app.services.planning import derive_plan
from app.services.search import (
    constrained_interchange,
    construct_multistratum,
    point_exchange,
    random_initial_design,
)
from app.services.structure import unit_map

SPLIT_PLOT = """
name: parcela
structure: "Plots(6)/Subplots(2)"
factors:
  - {name: A, levels: [-1, 0, 1], stratum: Plots}
  - {name: B, levels: [-1, 0, 1], stratum: Subplots}
criterion:
  kappa: {D: 0.5, DP: 0.5}
search: {starts: 3, seed: 17, jobs: 1}
"""

STRIP_PLOT = """
name: franjas
structure: "(Rows(4)*Cols(2))/Runs(2)"
factors:
  - {name: A, levels: [-1, 0, 1], stratum: Rows}
  - {name: B, levels: [-1, 0, 1], stratum: Runs}
  - {name: C, levels: [-1, 1], stratum: Runs}
criterion:
  kappa: {D: 1}
search: {starts: 2, seed: 4, jobs: 1}
interchange:
  - {after: Runs, cells: Rows.Cols, groups: Cols}
"""


def _single_factor(levels, m, weights, columns=1):
    factor = Factor("X1", "Plots", levels)
    spec = second_order_terms((factor,))
    spec = spec.restricted_to(spec.terms[:columns])
    cands = CandidateSet(np.array(levels, dtype=float).reshape(-1, 1), ("X1",))
    evaluator = CriterionEvaluator(BlockingScheme.crd(m), spec, weights, ("X1",), label="Plots")
    return cands, evaluator


@pytest.mark.unit
def test_two_point_linear_design_is_optimal():
    """Test de que el intercambio llega al óptimo {-1, 1} de un modelo lineal con dos puntos"""
    cands, evaluator = _single_factor((-1.0, 0.0, 1.0), 2, CriterionWeights(kappa_d=1.0))
    for seed in range(5):
        rng = np.random.default_rng(seed)
        start = random_initial_design(cands, 2, evaluator, rng)
        result = point_exchange(start, cands, evaluator, SearchConfig(n_jobs=1))
        assert sorted(result.levels[:, 0]) == [-1.0, 1.0]
        assert result.value.value == pytest.approx(2.0)


@pytest.mark.unit
def test_exchange_trajectory_is_monotone():
    cands, evaluator = _single_factor((-1.0, -0.5, 0.0, 0.5, 1.0), 8, CriterionWeights(kappa_dp=1.0), columns=2)
    rng = np.random.default_rng(2)
    start = random_initial_design(cands, 8, evaluator, rng)
    result = point_exchange(start, cands, evaluator, SearchConfig(n_jobs=1))
    steps = np.diff(result.trajectory)
    assert np.all(steps >= -1e-12)
    assert result.value.d > 0
    assert result.passes >= 1


@pytest.mark.unit
def test_first_improvement_policy():
    cands, evaluator = _single_factor((-1.0, 0.0, 1.0), 6, CriterionWeights(kappa_d=1.0), columns=2)
    start = random_initial_design(cands, 6, evaluator, np.random.default_rng(8))
    best = point_exchange(start, cands, evaluator, SearchConfig(policy="best", n_jobs=1))
    first = point_exchange(start, cands, evaluator, SearchConfig(policy="first", n_jobs=1))
    # |X'QX| máximo con seis puntos en tres niveles: dos réplicas de cada nivel
    assert best.value.value == pytest.approx(first.value.value)
    assert sorted(best.levels[:, 0]) == [-1.0, -1.0, 0.0, 0.0, 1.0, 1.0]


@pytest.mark.unit
def test_infeasible_start_when_m_below_p():
    factors = (Factor("X1", "Plots", (-1.0, 0.0, 1.0)), Factor("X2", "Plots", (-1.0, 0.0, 1.0)))
    spec = second_order_terms(factors)
    assert spec.p == 6
    cands = CandidateSet(np.array([[a, b] for a in (-1.0, 0.0, 1.0) for b in (-1.0, 0.0, 1.0)]), ("X1", "X2"))
    evaluator = CriterionEvaluator(BlockingScheme.crd(2), spec, CriterionWeights(kappa_d=1.0), ("X1", "X2"), "Plots")
    with pytest.raises(InfeasibleStartError) as info:
        random_initial_design(cands, 2, evaluator, np.random.default_rng(0), retry_cap=5)
    assert info.value.attempts == 5
    assert info.value.stratum == "Plots"


def _grid_problem(n_factors, term_texts, m):
    names = tuple(f"X{j + 1}" for j in range(n_factors))
    factors = tuple(Factor(name, "Plots", (-1.0, 0.0, 1.0)) for name in names)
    spec = second_order_terms(factors)
    spec = spec.restricted_to(tuple(t for t in spec.terms if t.text in term_texts))
    assert len(spec.terms) == len(term_texts)
    points = np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=n_factors)))
    cands = CandidateSet(points, names)
    evaluator = CriterionEvaluator(BlockingScheme.crd(m), spec, CriterionWeights(kappa_d=1.0), names, "Plots")
    return cands, evaluator


def _share_reaching_optimum(cands, evaluator, m, starts):
    """Enumera los diseños, toma el log|X'QX| global y cuenta los arranques que lo alcanzan."""
    feasible = []
    for idx in starts:
        levels = cands.points[list(idx)]
        value = evaluator.evaluate_points(levels)
        if not value.singular:
            feasible.append((levels, value.logdet))
    optimum = max(logdet for _, logdet in feasible)
    reached = 0
    for levels, _ in feasible:
        result = point_exchange(levels, cands, evaluator, SearchConfig(n_jobs=1))
        assert result.value.logdet <= optimum + 1e-9
        reached += result.value.logdet >= optimum - 1e-9
    return reached / len(feasible), optimum


@pytest.mark.unit
@pytest.mark.parametrize(
    "terms, m, optimum",
    [
        (("X1",), 3, np.log(8.0 / 3.0)),
        (("X1", "X1^2"), 3, np.log(4.0 / 3.0)),
        (("X1", "X1^2"), 4, np.log(2.0)),
    ],
)
def test_exchange_reaches_enumerated_optimum_one_factor(terms, m, optimum):
    """Test de que el intercambio llega al óptimo D exhaustivo desde cualquier arranque no singular"""
    cands, evaluator = _grid_problem(1, terms, m)
    share, best = _share_reaching_optimum(cands, evaluator, m, itertools.product(range(cands.size), repeat=m))
    assert best == pytest.approx(optimum)
    assert share >= 0.95


@pytest.mark.slow
@pytest.mark.parametrize("terms", [("X1", "X2"), ("X1", "X2", "X1*X2")])
def test_exchange_reaches_enumerated_optimum_two_factors(terms):
    """Test de que con dos factores en rejilla 3x3 y m = 4 casi todos los arranques alcanzan el óptimo global"""
    cands, evaluator = _grid_problem(2, terms, 4)
    # En un esquema CRD el orden de las filas no cambia X'QX: basta con los multiconjuntos
    starts = itertools.combinations_with_replacement(range(cands.size), 4)
    share, best = _share_reaching_optimum(cands, evaluator, 4, starts)
    # Factorial 2^2 en las esquinas
    expected = np.log(16.0) if len(terms) == 2 else np.log(64.0)
    assert best == pytest.approx(expected)
    assert share >= 0.95


@pytest.mark.unit
@pytest.mark.parametrize(
    "n_factors, terms",
    [(1, ("X1", "X1^2")), (2, ("X1", "X2", "X1*X2")), (2, ("X1", "X2", "X1^2", "X2^2", "X1*X2"))],
)
def test_saturated_model_returns_nonsingular_design(n_factors, terms):
    """Test de que con m = p se devuelve un diseño no singular cuando existe alguno"""
    m = len(terms) + 1
    cands, evaluator = _grid_problem(n_factors, terms, m)
    for seed in range(3):
        start = random_initial_design(cands, m, evaluator, np.random.default_rng(seed))
        result = point_exchange(start, cands, evaluator, SearchConfig(n_jobs=1))
        assert not result.value.singular
        assert result.value.value > 0
        assert not evaluator.evaluate_points(result.levels).singular
        assert len({tuple(row) for row in result.levels}) == m


@pytest.mark.integration
def test_construction_is_deterministic(write_yaml):
    """Test de que la misma semilla produce el mismo diseño con uno o varios procesos"""
    problem = load_problem(write_yaml(SPLIT_PLOT))
    plan = derive_plan(problem)
    first = construct_multistratum(plan, problem.search)
    second = construct_multistratum(plan, problem.search)
    parallel = construct_multistratum(plan, dataclasses.replace(problem.search, n_jobs=2))
    assert np.array_equal(first.design, second.design)
    assert np.array_equal(first.design, parallel.design)
    assert first.start_index == parallel.start_index
    assert len(first.start_values) == 3


@pytest.mark.integration
def test_construction_respects_strata(write_yaml):
    problem = load_problem(write_yaml(SPLIT_PLOT))
    plan = derive_plan(problem)
    result = construct_multistratum(plan, problem.search)
    assert result.design.shape == (12, 2)
    assert result.factor_names == ("A", "B")
    plots = unit_map(problem.structure, problem.structure.bottom, "Plots")
    for plot in range(6):
        assert np.unique(result.design[plots == plot, 0]).size == 1
    assert [r.stratum for r in result.reports] == ["Plots", "Plots.Subplots"]
    assert [d.stratum.label for d in result.stratum_designs] == ["Plots", "Plots.Subplots"]
    assert result.stratum_designs[1].inherited_names == ("A",)
    assert result.final_value.value == max(result.start_values)
    for report in result.reports:
        assert np.all(np.diff(report.trajectory) >= -1e-12)


@pytest.mark.integration
def test_interchange_never_worsens(write_yaml):
    problem = load_problem(write_yaml(STRIP_PLOT))
    plan = derive_plan(problem)
    result = construct_multistratum(plan, problem.search)
    runs = result.reports[-1]
    assert runs.interchange_before is not None
    assert runs.interchange_after >= runs.interchange_before - 1e-12


@pytest.mark.unit
def test_constrained_interchange_swaps_only_matching_cells():
    # cuatro celdas de dos filas, dos grupos; las celdas 0 y 2 comparten filas heredadas
    inherited = np.array([[1.0], [1.0], [-1.0], [-1.0], [1.0], [1.0], [-1.0], [-1.0]])
    levels = np.array([[1.0], [1.0], [-1.0], [1.0], [-1.0], [-1.0], [1.0], [-1.0]])
    cells = np.repeat(np.arange(4), 2)
    groups = np.array([0, 0, 0, 0, 1, 1, 1, 1])
    factors = (Factor("A", "Rows", (-1.0, 1.0)), Factor("B", "Runs", (-1.0, 1.0)))
    spec = second_order_terms(factors)
    evaluator = CriterionEvaluator(
        BlockingScheme.from_labels([groups]), spec, CriterionWeights(kappa_d=1.0), ("A", "B"), "Runs"
    )
    result = constrained_interchange(levels, inherited, cells, groups, evaluator)
    assert result.after.log_value >= result.before.log_value
    assert np.array_equal(np.sort(result.levels[:, 0]), np.sort(levels[:, 0]))
    if result.swaps:
        assert not np.array_equal(result.levels, levels)
