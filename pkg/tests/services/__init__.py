# Tests de servicios
