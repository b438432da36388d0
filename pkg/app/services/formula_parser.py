"""
Analizador de fórmulas de Wilkinson-Rogers para estructuras de unidades.

Gramática:
    expr := term (('*'|'/') term)*
    term := NAME '(' INT ')' | '(' expr ')'

`*` (cruce) y `/` (anidamiento) tienen la misma precedencia y asocian a la izquierda.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple, Union

from app.core.logging import get_logger
from app.models.errors import FormulaSyntaxError


logger = get_logger("services.formula_parser")

_TOKEN_RE = re.compile(r"\s*(?:(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>\d+)|(?P<op>[*/()]))")


@dataclass(frozen=True)
class Token:
    kind: str  # "name", "int", "op", "end"
    text: str
    position: int


@dataclass(frozen=True)
class FactorLeaf:
    name: str
    size: int
    position: int


@dataclass(frozen=True)
class BinaryNode:
    op: str  # "*" o "/"
    left: "FormulaNode"
    right: "FormulaNode"


FormulaNode = Union[FactorLeaf, BinaryNode]


def tokenize(formula: str) -> List[Token]:
    """Divide la fórmula en tokens; cualquier carácter no reconocido es un error."""
    tokens: List[Token] = []
    pos = 0
    while pos < len(formula):
        if formula[pos:].strip() == "":
            break
        match = _TOKEN_RE.match(formula, pos)
        if match is None or match.end() == pos:
            start = pos + (len(formula[pos:]) - len(formula[pos:].lstrip()))
            raise FormulaSyntaxError(f"Carácter inesperado {formula[start]!r}", start, formula)
        kind = match.lastgroup or "op"
        start = match.start(kind)
        tokens.append(Token(kind, match.group(kind), start))
        pos = match.end()
    tokens.append(Token("end", "", len(formula)))
    return tokens


class _Parser:
    """Descenso recursivo sobre la lista de tokens."""

    def __init__(self, formula: str) -> None:
        self.formula = formula
        self.tokens = tokenize(formula)
        self.index = 0
        self.mixed_without_parentheses = False

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.current
        self.index += 1
        return token

    def _expect(self, kind: str, text: Optional[str] = None) -> Token:
        token = self.current
        if token.kind != kind or (text is not None and token.text != text):
            wanted = repr(text) if text else kind
            found = "fin de la fórmula" if token.kind == "end" else repr(token.text)
            raise FormulaSyntaxError(f"Se esperaba {wanted} y se encontró {found}", token.position, self.formula)
        return self._advance()

    def parse(self) -> FormulaNode:
        node = self._expr()
        if self.current.kind != "end":
            raise FormulaSyntaxError(
                f"Token sobrante {self.current.text!r}", self.current.position, self.formula
            )
        return node

    def _expr(self) -> FormulaNode:
        node = self._term()
        ops_seen = set()
        while self.current.kind == "op" and self.current.text in "*/":
            op = self._advance().text
            ops_seen.add(op)
            node = BinaryNode(op, node, self._term())
        if len(ops_seen) > 1:
            self.mixed_without_parentheses = True
        return node

    def _term(self) -> FormulaNode:
        token = self.current
        if token.kind == "op" and token.text == "(":
            self._advance()
            node = self._expr()
            self._expect("op", ")")
            return node
        if token.kind == "name":
            self._advance()
            self._expect("op", "(")
            size_token = self._expect("int")
            self._expect("op", ")")
            return FactorLeaf(token.text, int(size_token.text), token.position)
        found = "fin de la fórmula" if token.kind == "end" else repr(token.text)
        raise FormulaSyntaxError(f"Se esperaba un factor o '(' y se encontró {found}", token.position, self.formula)


def parse_formula(formula: str) -> FormulaNode:
    """
    Analiza la fórmula y devuelve el árbol sintáctico.

    Raises:
        FormulaSyntaxError: con la posición (base 0) del primer token inválido.
    """
    parser = _Parser(formula)
    tree = parser.parse()
    if parser.mixed_without_parentheses:
        logger.warning(
            "La fórmula mezcla '*' y '/' sin paréntesis; se evalúa de izquierda a derecha",
            extra={"formula": formula},
        )
    return tree


def iter_leaves(node: FormulaNode) -> Iterator[FactorLeaf]:
    """Recorre las hojas en orden de aparición en la fórmula."""
    if isinstance(node, FactorLeaf):
        yield node
        return
    yield from iter_leaves(node.left)
    yield from iter_leaves(node.right)


def render_formula(node: FormulaNode) -> str:
    """
    Render canónico con los paréntesis mínimos para reconstruir el mismo árbol.
    El operando izquierdo se agrupa si su operador difiere; el derecho si es compuesto.
    """
    if isinstance(node, FactorLeaf):
        return f"{node.name}({node.size})"
    left = render_formula(node.left)
    if isinstance(node.left, BinaryNode) and node.left.op != node.op:
        left = f"({left})"
    right = render_formula(node.right)
    if isinstance(node.right, BinaryNode):
        right = f"({right})"
    return f"{left}{node.op}{right}"


def tree_signature(node: FormulaNode) -> Tuple:
    """Firma estructural (sin posiciones) para comparar árboles."""
    if isinstance(node, FactorLeaf):
        return (node.name, node.size)
    return (node.op, tree_signature(node.left), tree_signature(node.right))


__all__ = [
    "Token",
    "FactorLeaf",
    "BinaryNode",
    "FormulaNode",
    "tokenize",
    "parse_formula",
    "iter_leaves",
    "render_formula",
    "tree_signature",
]
