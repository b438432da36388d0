"""
Tests para el analizador de fórmulas de estructuras de unidades.
"""
import pytest

from app.models.errors import FormulaSyntaxError
from app.services.formula_parser import (
    BinaryNode,
    FactorLeaf,
    iter_leaves,
    parse_formula,
    render_formula,
    tokenize,
    tree_signature,
)


@pytest.mark.unit
def test_tokenize_records_positions():
    """Test de tokens con su posición en la fórmula"""
    tokens = tokenize("Days(7) * Times(4)")
    assert [t.kind for t in tokens] == ["name", "op", "int", "op", "op", "name", "op", "int", "op", "end"]
    assert tokens[0].position == 0
    assert tokens[5].text == "Times"
    assert tokens[5].position == 10


@pytest.mark.unit
def test_tokenize_rejects_unknown_character():
    with pytest.raises(FormulaSyntaxError) as info:
        tokenize("Days(7) + Times(4)")
    assert info.value.position == 8


@pytest.mark.unit
def test_parse_crossing():
    tree = parse_formula("Days(7)*Times(4)")
    assert isinstance(tree, BinaryNode)
    assert tree.op == "*"
    assert tree.left == FactorLeaf("Days", 7, 0)
    assert [leaf.name for leaf in iter_leaves(tree)] == ["Days", "Times"]


@pytest.mark.unit
def test_parse_nesting_with_parentheses():
    tree = parse_formula("(Ovens(10)*Batches(3))/Runs(2)")
    assert tree_signature(tree) == ("/", ("*", ("Ovens", 10), ("Batches", 3)), ("Runs", 2))


@pytest.mark.unit
def test_operators_associate_left():
    """Test de que * y / comparten precedencia y asocian a la izquierda"""
    tree = parse_formula("A(2)*B(3)/C(2)")
    assert tree_signature(tree) == ("/", ("*", ("A", 2), ("B", 3)), ("C", 2))


@pytest.mark.unit
@pytest.mark.parametrize(
    "formula, position",
    [
        ("Days(7)*", 8),
        ("Days(x)", 5),
        ("Days7)", 5),
        ("(Days(7)*Times(4)", 17),
        ("Days(7))", 7),
        ("*Days(7)", 0),
    ],
)
def test_syntax_errors_report_position(formula, position):
    with pytest.raises(FormulaSyntaxError) as info:
        parse_formula(formula)
    assert info.value.position == position
    assert info.value.caret().splitlines()[1] == " " * position + "^"


@pytest.mark.unit
@pytest.mark.parametrize(
    "formula",
    [
        "Days(7)*Times(4)",
        "Days(26)*Periods(2)",
        "(Ovens(10)*Batches(3))/Runs(2)",
        "(Batches(20)*Occasions(5))/Runs(5)",
        "A(2)/(B(3)*C(2))",
        "A(2)*(B(3)/C(2))",
    ],
)
def test_render_reparses_to_same_tree(formula):
    tree = parse_formula(formula)
    assert tree_signature(parse_formula(render_formula(tree))) == tree_signature(tree)


@pytest.mark.unit
def test_render_drops_redundant_parentheses():
    assert render_formula(parse_formula("((A(2))*(B(3)))")) == "A(2)*B(3)"
