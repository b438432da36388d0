# Tests de modelos
