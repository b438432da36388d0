"""
Tests para el servicio de estructuras de unidades.
"""
import numpy as np
import pytest

from app.models.errors import FormulaSyntaxError, StructureError
from app.services.structure import (
    hasse_edges,
    parse_structure,
    render_hasse,
    render_structure,
    stratum_df,
    stratum_projector,
    unit_indicator,
    unit_map,
)


@pytest.fixture(scope="module")
def crossed():
    return parse_structure("Days(7)*Times(4)")


@pytest.fixture(scope="module")
def ovens():
    return parse_structure("(Ovens(10)*Batches(3))/Runs(2)")


@pytest.mark.unit
def test_crossed_strata(crossed):
    """Test de estratos de un cruce de dos factores"""
    assert crossed.n == 28
    assert [s.label for s in crossed.strata] == ["Mean", "Days", "Times", "Days.Times"]
    assert [s.df for s in crossed.strata] == [1, 6, 3, 18]
    assert crossed.bottom.name == "Days.Times"
    assert [s.label for s in crossed.random_strata] == ["Days", "Times"]


@pytest.mark.unit
def test_nested_strata(ovens):
    assert ovens.n == 60
    assert [s.label for s in ovens.strata] == [
        "Mean",
        "Ovens",
        "Batches",
        "Ovens.Batches",
        "Ovens.Batches.Runs",
    ]
    assert [s.name for s in ovens.strata][-1] == "Runs"
    assert stratum_df(ovens) == {"Mean": 1, "Ovens": 9, "Batches": 2, "Ovens.Batches": 18, "Ovens.Batches.Runs": 30}
    assert ovens.stratum("Runs") is ovens.bottom


@pytest.mark.unit
def test_large_structure_sizes():
    structure = parse_structure("(Batches(20)*Occasions(5))/Runs(5)")
    assert structure.n == 500
    assert [s.name for s in structure.strata] == ["Mean", "Batches", "Occasions", "Batches.Occasions", "Runs"]
    assert [s.df for s in structure.strata] == [1, 19, 4, 76, 400]


@pytest.mark.unit
def test_simple_nesting_names():
    structure = parse_structure("Plots(3)/Subplots(2)")
    assert [s.label for s in structure.strata] == ["Mean", "Plots", "Plots.Subplots"]
    assert structure.bottom.name == "Subplots"
    assert [s.df for s in structure.strata] == [1, 2, 3]


@pytest.mark.unit
def test_duplicate_and_small_factors_rejected():
    with pytest.raises(StructureError):
        parse_structure("Days(7)*Days(4)")
    with pytest.raises(StructureError):
        parse_structure("Days(1)*Times(4)")
    with pytest.raises(FormulaSyntaxError):
        parse_structure("Days(7)**Times(4)")


@pytest.mark.unit
def test_unknown_stratum_lookup(crossed):
    with pytest.raises(StructureError):
        crossed.stratum("Weeks")


@pytest.mark.unit
def test_render_roundtrip(ovens):
    again = parse_structure(render_structure(ovens))
    assert [s.label for s in again.strata] == [s.label for s in ovens.strata]
    assert again.n == ovens.n


@pytest.mark.unit
def test_unit_indicator_columns(ovens):
    """Test de que cada unidad del estrato agrupa n/u_t unidades observacionales"""
    for stratum in ovens.strata:
        z = unit_indicator(ovens, stratum).entries
        assert z.shape == (60, stratum.units)
        assert np.all(z.sum(axis=1) == 1)
        assert np.all(z.sum(axis=0) == 60 // stratum.units)


@pytest.mark.unit
def test_unit_map_replicates_coarser_units(ovens):
    mapping = unit_map(ovens, "Ovens.Batches", "Ovens")
    assert mapping.shape == (30,)
    assert list(mapping[:6]) == [0, 0, 0, 1, 1, 1]
    batches = unit_map(ovens, "Runs", "Batches")
    assert list(batches[:6]) == [0, 0, 1, 1, 2, 2]
    with pytest.raises(StructureError):
        unit_map(ovens, "Ovens", "Runs")


@pytest.mark.unit
@pytest.mark.parametrize("formula", ["Days(7)*Times(4)", "(Ovens(10)*Batches(3))/Runs(2)", "A(2)*B(3)*C(2)"])
def test_projectors_form_orthogonal_decomposition(formula):
    """Test de proyectores idempotentes, ortogonales entre sí y que suman la identidad"""
    structure = parse_structure(formula)
    projectors = [stratum_projector(structure, s) for s in structure.strata]
    total = np.zeros((structure.n, structure.n))
    for i, (stratum, s_i) in enumerate(zip(structure.strata, projectors)):
        assert np.allclose(s_i, s_i.T)
        assert np.allclose(s_i @ s_i, s_i, atol=1e-10)
        assert np.trace(s_i) == pytest.approx(stratum.df)
        for s_j in projectors[i + 1 :]:
            assert np.allclose(s_i @ s_j, 0.0, atol=1e-10)
        total += s_i
    assert np.allclose(total, np.eye(structure.n), atol=1e-10)


@pytest.mark.unit
def test_three_way_cross_df():
    structure = parse_structure("A(2)*B(3)*C(2)")
    dfs = stratum_df(structure)
    assert dfs["A.B"] == 2
    assert dfs["A.B.C"] == 2
    assert sum(dfs.values()) == 12


@pytest.mark.unit
def test_hasse_edges(ovens):
    assert hasse_edges(ovens) == [
        ("Mean", "Ovens"),
        ("Mean", "Batches"),
        ("Ovens", "Ovens.Batches"),
        ("Batches", "Ovens.Batches"),
        ("Ovens.Batches", "Ovens.Batches.Runs"),
    ]


@pytest.mark.unit
def test_render_hasse_lists_every_stratum(crossed):
    text = render_hasse(crossed)
    assert text.splitlines()[0].startswith("Days(7)*Times(4)")
    assert "(n=28)" in text
    assert len(text.splitlines()) == 1 + len(crossed.strata)
