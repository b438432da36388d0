"""
Controladores que coordinan los servicios para las órdenes de la línea de comandos.
"""

__all__ = ["main_controller"]
