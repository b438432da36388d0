"""
Configuración de pytest y fixtures compartidas.
"""
import os
import sys
import tempfile
from pathlib import Path
from typing import Callable, Generator

import pytest

# Añadir el directorio raíz al path para imports
ROOT_DIR = Path(__file__).parent.parent
sys.path.insert(0, str(ROOT_DIR))

# Sin log JSON y un solo proceso durante los tests
os.environ.setdefault("ESTRATO_JSON_LOG", "0")
os.environ.setdefault("ESTRATO_JOBS", "1")

import numpy as np  # noqa: E402

from app.models.config import ProblemConfig  # noqa: E402
from app.services.config_loader import load_problem  # noqa: E402
from app.services.design_io import read_design  # noqa: E402

CONFIGS = ROOT_DIR / "configs"
FIXTURES = ROOT_DIR / "fixtures"


@pytest.fixture
def temp_dir() -> Generator[Path, None, None]:
    """Crea un directorio temporal para tests."""
    with tempfile.TemporaryDirectory() as tmpdir:
        yield Path(tmpdir)


@pytest.fixture(scope="session")
def load_config() -> Callable[[str], ProblemConfig]:
    """Carga una configuración de ejemplo por nombre ("example1"...)."""
    cache = {}

    def _load(name: str) -> ProblemConfig:
        if name not in cache:
            cache[name] = load_problem(CONFIGS / f"{name}.yaml")
        return cache[name]

    return _load


@pytest.fixture(scope="session")
def load_fixture(load_config) -> Callable[[str, str], np.ndarray]:
    """Lee un diseño impreso de fixtures/ en el orden canónico de su problema."""

    def _load(example: str, design: str) -> np.ndarray:
        problem = load_config(example)
        return read_design(FIXTURES / f"{example}_{design}.csv", problem.structure, problem.factor_names)

    return _load


@pytest.fixture
def example1(load_config) -> ProblemConfig:
    return load_config("example1")


@pytest.fixture
def example2(load_config) -> ProblemConfig:
    return load_config("example2")


@pytest.fixture
def example3(load_config) -> ProblemConfig:
    return load_config("example3")


@pytest.fixture
def write_yaml(temp_dir: Path) -> Callable[[str, str], Path]:
    """Escribe un YAML de configuración en el directorio temporal."""

    def _write(text: str, name: str = "problem.yaml") -> Path:
        path = temp_dir / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
