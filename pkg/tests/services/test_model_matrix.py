"""
Tests para términos del modelo, matrices del modelo e indicadoras de tratamientos.
"""
import numpy as np
import pytest

from app.models.errors import ModelSpecError
from app.models.model import Factor
from app.services.model_matrix import (
    build_model_matrix,
    build_term_spec,
    build_treatment_indicator,
    linear_2fi_terms,
    parse_term,
    second_order_terms,
    term_home,
)
from app.services.structure import parse_structure

THREE = (-1.0, 0.0, 1.0)


def _factors(count, stratum="Days.Times", levels=THREE):
    return tuple(Factor(f"X{i}", stratum, levels) for i in range(1, count + 1))


@pytest.mark.unit
@pytest.mark.parametrize("count, columns", [(1, 2), (3, 9), (5, 20)])
def test_second_order_column_counts(count, columns):
    spec = second_order_terms(_factors(count))
    assert len(spec.columns) == columns
    assert spec.p == columns + 1


@pytest.mark.unit
def test_second_order_skips_two_level_quadratics():
    factors = _factors(2, levels=(-1.0, 1.0))
    spec = second_order_terms(factors)
    assert spec.columns == ("X1", "X2", "X1*X2")
    assert linear_2fi_terms(_factors(3)).columns == ("X1", "X2", "X3", "X1*X2", "X1*X3", "X2*X3")


@pytest.mark.unit
def test_second_order_term_count_with_mixed_factors():
    """Test del número de términos y columnas: k + k_q + k(k−1)/2 con k_q factores que admiten cuadrático"""
    factors = (
        Factor("X1", "Plots", THREE),
        Factor("X2", "Plots", THREE),
        Factor("X3", "Plots", (-1.0, 1.0)),
        Factor("X4", "Plots", (1.0, 2.0, 3.0), qualitative=True),
    )
    spec = second_order_terms(factors)
    k, k_q = 4, 2
    assert len(spec.terms) == k + k_q + k * (k - 1) // 2 == 12
    assert [t.text for t in spec.terms if t.max_exponent == 2] == ["X1^2", "X2^2"]
    # X4 ocupa dos columnas en su efecto principal y en cada una de sus tres interacciones
    assert len(spec.columns) == 12 + 1 + 3
    assert spec.p == 17


@pytest.mark.unit
def test_parse_term():
    factors = _factors(3)
    assert parse_term("X1*X2^2", factors).powers == (("X1", 1), ("X2", 2))
    assert parse_term(" X3 ", factors).text == "X3"
    with pytest.raises(ModelSpecError):
        parse_term("X9", factors)
    with pytest.raises(ModelSpecError):
        parse_term("X1+X2", factors)


@pytest.mark.unit
def test_build_term_spec_exclude_and_extra():
    factors = _factors(3)
    spec = build_term_spec("second-order", factors, exclude=["X1*X2", "X3^2"], extra=["X1*X2*X3"])
    assert "X1*X2" not in spec.columns
    assert "X3^2" not in spec.columns
    assert spec.columns[-1] == "X1*X2*X3"
    assert len(spec.columns) == 8


@pytest.mark.unit
def test_build_term_spec_custom_and_unknown_kind():
    factors = _factors(2)
    spec = build_term_spec("custom", factors, terms=["X1", "X1*X2"])
    assert spec.columns == ("X1", "X1*X2")
    with pytest.raises(ModelSpecError):
        build_term_spec("cubic", factors)


@pytest.mark.unit
def test_single_factor_model_matrix():
    """Test de la matriz del modelo para un factor con términos lineal y cuadrático"""
    spec = second_order_terms(_factors(1))
    points = np.array([[-1.0], [0.0], [1.0], [1.0]])
    x = build_model_matrix((points, ("X1",)), spec)
    assert x.labels == ("X1", "X1^2")
    assert np.array_equal(x.values, [[-1.0, 1.0], [0.0, 0.0], [1.0, 1.0], [1.0, 1.0]])
    assert x.m == 4


@pytest.mark.unit
def test_qualitative_factor_columns():
    factors = (Factor("X1", "Batches", (-1.0, 1.0)), Factor("X8", "Occasions", (1.0, 2.0, 3.0), qualitative=True))
    spec = build_term_spec("custom", factors, terms=["X1", "X8", "X1*X8"])
    points = np.array([[1.0, 1.0], [-1.0, 2.0], [1.0, 3.0]])
    x = build_model_matrix((points, ("X1", "X8")), spec)
    assert x.labels == ("X1", "X8[2]", "X8[3]", "X1*X8[2]", "X1*X8[3]")
    assert np.array_equal(
        x.values,
        [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [-1.0, 1.0, 0.0, -1.0, 0.0],
            [1.0, 0.0, 1.0, 0.0, 1.0],
        ],
    )


@pytest.mark.unit
def test_model_matrix_requires_named_columns():
    spec = second_order_terms(_factors(2))
    with pytest.raises(ModelSpecError):
        build_model_matrix((np.zeros((3, 2)), ("X1", "X5")), spec)
    with pytest.raises(ModelSpecError):
        build_model_matrix((np.zeros((3, 3)), ("X1", "X2")), spec)


@pytest.mark.unit
def test_treatment_indicator_first_appearance_order():
    points = np.array([[1.0, 0.0], [-1.0, 1.0], [1.0, 0.0], [0.0, 0.0]])
    t = build_treatment_indicator(points)
    assert t.t == 3
    assert list(t.labels) == [0, 1, 0, 2]
    assert np.array_equal(t.values.sum(axis=0), [2.0, 1.0, 1.0])
    assert np.array_equal(t.combinations[1], [-1.0, 1.0])


@pytest.mark.unit
def test_treatment_indicator_without_columns():
    t = build_treatment_indicator(np.zeros((4, 0)))
    assert t.t == 1
    assert np.array_equal(t.values, np.ones((4, 1)))


@pytest.mark.unit
def test_term_home_uses_stratum_union():
    structure = parse_structure("Days(26)*Periods(2)")
    factors = (Factor("X1", "Days", THREE), Factor("X2", "Days.Periods", THREE))
    assert term_home(parse_term("X1^2", factors), structure, factors).label == "Days"
    assert term_home(parse_term("X1*X2", factors), structure, factors).label == "Days.Periods"


@pytest.mark.unit
def test_term_home_in_nested_structure():
    structure = parse_structure("Plots(3)/Subplots(2)")
    factors = (Factor("A", "Plots", THREE), Factor("B", "Subplots", THREE))
    assert term_home(parse_term("A*B", factors), structure, factors).name == "Subplots"


@pytest.mark.unit
def test_term_home_unknown_factor():
    structure = parse_structure("Days(26)*Periods(2)")
    factors = (Factor("X1", "Days", THREE),)
    other = (Factor("X1", "Days", THREE), Factor("X2", "Days.Periods", THREE))
    with pytest.raises(ModelSpecError):
        term_home(parse_term("X1*X2", other), structure, factors)
