"""
Lectura y escritura de diseños y tablas en CSV, y verificación de los fixtures transcritos.
"""
from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from app.core.logging import get_logger
from app.core.resources import FIXTURES_DIR
from app.models.errors import DimensionMismatchError
from app.models.structure import UnitStructure


logger = get_logger("services.design_io")

FLOAT_FORMAT = "%.6g"
CHECKSUM_FILE = "SHA256SUMS"


def design_frame(structure: UnitStructure, design: np.ndarray, factor_names: Sequence[str]) -> pd.DataFrame:
    """Tabla del diseño: factores de unidades (niveles base 1) seguidos de los factores."""
    units = pd.DataFrame(structure.unit_levels + 1, columns=list(structure.factor_names))
    values = pd.DataFrame(np.asarray(design, dtype=float), columns=list(factor_names))
    return pd.concat([units, values], axis=1)


def write_frame(frame: pd.DataFrame, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Archivo escrito", extra={"path": str(path), "rows": len(frame)})
    return path


def write_design(path: Path, structure: UnitStructure, design: np.ndarray, factor_names: Sequence[str]) -> Path:
    return write_frame(design_frame(structure, design, factor_names), path)


def read_design(path: Path, structure: UnitStructure, factor_names: Sequence[str]) -> np.ndarray:
    """
    Lee un diseño y lo devuelve en el orden canónico de unidades.

    Raises:
        DimensionMismatchError: filas distintas de n, columnas ausentes o
            unidades incompletas.
    """
    frame = pd.read_csv(path)
    missing = [name for name in factor_names if name not in frame.columns]
    if missing:
        raise DimensionMismatchError(f"{path}: faltan columnas {', '.join(missing)}")
    if len(frame) != structure.n:
        raise DimensionMismatchError(f"{path}: {len(frame)} filas, la estructura tiene n={structure.n}")

    unit_cols = list(structure.factor_names)
    if all(col in frame.columns for col in unit_cols):
        levels = frame[unit_cols].to_numpy(dtype=np.int64) - 1
        sizes = [structure.sizes[c] for c in unit_cols]
        if (levels < 0).any() or (levels >= np.asarray(sizes)).any():
            raise DimensionMismatchError(f"{path}: niveles de unidad fuera de rango")
        order = np.ravel_multi_index(levels.T, sizes)
        if np.unique(order).size != structure.n:
            raise DimensionMismatchError(f"{path}: unidades repetidas o incompletas")
        frame = frame.iloc[np.argsort(order)].reset_index(drop=True)
    else:
        logger.warning("El diseño no trae columnas de unidades; se asume orden canónico", extra={"path": str(path)})
    return frame[list(factor_names)].to_numpy(dtype=float)


def verify_fixture_checksums(directory: Optional[Path] = None) -> Dict[str, bool]:
    """Compara los SHA-256 de los fixtures con el archivo de sumas; True si coinciden."""
    directory = Path(directory or FIXTURES_DIR)
    results: Dict[str, bool] = {}
    lines: List[str] = (directory / CHECKSUM_FILE).read_text(encoding="utf-8").splitlines()
    for line in lines:
        if not line.strip():
            continue
        expected, name = line.split(maxsplit=1)
        name = name.strip().lstrip("*")
        target = directory / name
        actual = hashlib.sha256(target.read_bytes()).hexdigest() if target.exists() else ""
        results[name] = actual == expected
        if actual != expected:
            logger.warning("Checksum de fixture distinto", extra={"fixture": name})
    return results


__all__ = [
    "FLOAT_FORMAT",
    "design_frame",
    "write_frame",
    "write_design",
    "read_design",
    "verify_fixture_checksums",
]
