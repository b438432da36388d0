# Tests de controladores
