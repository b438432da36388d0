# Tests del núcleo
