"""
Servicios de dominio: fórmulas y estructuras, núcleo numérico, criterios, búsqueda,
evaluación, configuración y E/S de diseños.
"""

__all__ = [
    "formula_parser",
    "structure",
    "numkernel",
    "model_matrix",
    "candidates",
    "criteria",
    "planning",
    "search",
    "evaluation",
    "config_loader",
    "design_io",
]
