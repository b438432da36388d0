"""
Primitivas de matrices densas y cuantiles F usados por los criterios de diseño.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy import linalg, special

from app.core.logging import get_logger
from app.models.errors import NumericalError


logger = get_logger("services.numkernel")

DEFAULT_RANK_TOL = 1e-8
SINGULAR_EIG_TOL = 1e-10


def _pivots(matrix: np.ndarray) -> np.ndarray:
    r = linalg.qr(matrix, mode="r", pivoting=True, check_finite=True)[0]
    k = min(matrix.shape)
    return np.abs(np.diag(r[:k, :k]))


def rank(matrix: np.ndarray, tol: float = DEFAULT_RANK_TOL, scale: Optional[float] = None) -> int:
    """
    Rango numérico por QR con pivoteo.

    Los pivotes por debajo de `tol` × referencia cuentan como cero; la referencia es el
    mayor pivote o `scale` si es mayor (útil para matrices proyectadas cuyo valor exacto es 0).
    """
    if tol <= 0:
        raise NumericalError("La tolerancia del rango debe ser positiva")
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.size == 0:
        raise NumericalError("No se puede calcular el rango de una matriz vacía")
    pivots = _pivots(matrix)
    reference = float(pivots.max()) if pivots.size else 0.0
    if scale is not None:
        reference = max(reference, float(scale))
    if reference == 0.0:
        return 0
    threshold = tol * reference
    ambiguous = (pivots > threshold * 1e-2) & (pivots < threshold * 1e2)
    if np.any(ambiguous):
        logger.warning(
            "rank_ambiguous: pivotes cerca de la tolerancia",
            extra={"pivots": pivots[ambiguous].tolist(), "threshold": threshold},
        )
    return int(np.count_nonzero(pivots > threshold))


def orthonormal_basis(matrix: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Base ortonormal del espacio columna truncada al rango numérico."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[1] == 0:
        raise NumericalError("Se necesita al menos una columna")
    q, r, _ = linalg.qr(matrix, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return np.zeros((matrix.shape[0], 0))
    k = int(np.count_nonzero(diag > tol * diag[0]))
    return q[:, :k]


def projector_onto_colspace(matrix: np.ndarray, tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Proyector ortogonal simétrico sobre el espacio columna de `matrix`."""
    basis = orthonormal_basis(matrix, tol)
    projector = basis @ basis.T
    return (projector + projector.T) / 2.0


@lru_cache(maxsize=4096)
def f_quantile(d1: int, d2: int, prob: float) -> float:
    """
    Cuantil de la distribución F(d1, d2) por inversión de la beta incompleta regularizada.
    """
    if d1 < 1 or d2 < 1:
        raise NumericalError(f"Grados de libertad inválidos: ({d1}, {d2})")
    if not 0.0 <= prob < 1.0:
        raise NumericalError(f"Probabilidad fuera de [0, 1): {prob}")
    if prob == 0.0:
        return 0.0
    b = float(special.betaincinv(d1 / 2.0, d2 / 2.0, prob))
    return d2 * b / (d1 * (1.0 - b))


def log_det_pd(matrix: np.ndarray) -> float:
    """Log-determinante de una matriz definida positiva vía Cholesky."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return 0.0
    try:
        c, _ = linalg.cho_factor(matrix, lower=True, check_finite=True)
    except linalg.LinAlgError as exc:
        raise NumericalError("La matriz no es definida positiva") from exc
    return float(2.0 * np.sum(np.log(np.diag(c))))


def spectral_summary(
    stack: np.ndarray, weights: Optional[np.ndarray] = None, need_trace: bool = True
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Resumen espectral por lotes de matrices simétricas (K × q × q).

    Returns:
        (logdet, traza ponderada de la inversa, singular) por matriz.
    """
    stack = np.asarray(stack, dtype=float)
    if stack.ndim == 2:
        stack = stack[None, :, :]
    k, q, _ = stack.shape
    if q == 0:
        return np.zeros(k), np.zeros(k), np.zeros(k, dtype=bool)
    if need_trace:
        eigvals, eigvecs = np.linalg.eigh(stack)
    else:
        eigvals, eigvecs = np.linalg.eigvalsh(stack), None
    top = np.max(np.abs(eigvals), axis=1)
    singular = (eigvals[:, 0] <= SINGULAR_EIG_TOL * np.maximum(top, 1e-300)) | (top == 0.0)
    safe = np.where(singular[:, None], 1.0, eigvals)
    logdet = np.where(singular, -np.inf, np.sum(np.log(safe), axis=1))
    if eigvecs is None:
        trace = np.full(k, np.nan)
    else:
        w = np.ones(q) if weights is None else np.asarray(weights, dtype=float)
        # tr(W M^-1) = Σ_k (Σ_j w_j v_jk²) / λ_k
        weighted = np.einsum("j,kjl->kl", w, eigvecs**2)
        trace = np.where(singular, np.inf, np.sum(weighted / safe, axis=1))
    return logdet, trace, singular


__all__ = [
    "DEFAULT_RANK_TOL",
    "rank",
    "orthonormal_basis",
    "projector_onto_colspace",
    "f_quantile",
    "log_det_pd",
    "spectral_summary",
]
