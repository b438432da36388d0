"""
Tests para los modelos de factores, términos y especificaciones de términos.
"""
import pytest

from app.models.errors import ModelSpecError
from app.models.model import Factor, Term, TermSpec


@pytest.mark.unit
def test_factor_validation():
    """Un factor necesita dos niveles distintos como mínimo."""
    with pytest.raises(ModelSpecError):
        Factor("X1", "Days", (0.0,))
    with pytest.raises(ModelSpecError):
        Factor("X1", "Days", (1.0, 1.0))
    assert Factor("X1", "Days", (-1.0, 0.0, 1.0)).supports_quadratic
    assert not Factor("X1", "Days", (-1.0, 1.0)).supports_quadratic
    assert not Factor("X8", "Occasions", (1.0, 2.0, 3.0), qualitative=True).supports_quadratic


@pytest.mark.unit
def test_term_properties():
    term = Term((("X1", 1), ("X3", 2)))
    assert term.factors == frozenset({"X1", "X3"})
    assert term.degree == 3
    assert term.max_exponent == 2
    assert term.text == "X1*X3^2"
    assert str(Term((("X2", 1),))) == "X2"


@pytest.mark.unit
def test_term_rejects_repeated_factor_and_bad_exponent():
    with pytest.raises(ModelSpecError):
        Term((("X1", 1), ("X1", 1)))
    with pytest.raises(ModelSpecError):
        Term((("X1", 0),))
    with pytest.raises(ModelSpecError):
        Term(())


@pytest.mark.unit
def test_term_spec_validation():
    x1 = Factor("X1", "Runs", (-1.0, 0.0, 1.0))
    x8 = Factor("X8", "Occasions", (1.0, 2.0, 3.0), qualitative=True)
    with pytest.raises(ModelSpecError):
        TermSpec((x1,), (Term((("X1", 1),)), Term((("X1", 1),))))
    with pytest.raises(ModelSpecError):
        TermSpec((x1,), (Term((("X2", 1),)),))
    with pytest.raises(ModelSpecError):
        TermSpec((x1,), (Term((("X1", 3),)),))
    assert TermSpec((x1,), (Term((("X1", 3),)),), allow_high_order=True).p == 2
    with pytest.raises(ModelSpecError):
        TermSpec((x8,), (Term((("X8", 2),)),))


@pytest.mark.unit
def test_term_spec_columns_expand_qualitative_levels():
    """Un factor cualitativo de k niveles aporta k−1 columnas, también en interacciones."""
    x1 = Factor("X1", "Runs", (-1.0, 1.0))
    x8 = Factor("X8", "Occasions", (1.0, 2.0, 3.0), qualitative=True)
    spec = TermSpec((x1, x8), (Term((("X1", 1),)), Term((("X8", 1),)), Term((("X1", 1), ("X8", 1)))))
    assert spec.columns == ("X1", "X8[2]", "X8[3]", "X1*X8[2]", "X1*X8[3]")
    assert spec.p == 6
    assert spec.restricted_to(spec.terms[:1]).p == 2
