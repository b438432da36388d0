"""
Paquete raíz de EstratoDoE.
Separa utilidades nucleares, modelos de datos, servicios numéricos y controladores.
"""

__all__ = ["core", "models", "services", "controllers"]
