"""
Criterio compuesto por estratos: proyectores Q, grados de libertad de error puro
y evaluador incremental para el intercambio de puntos.
"""
from __future__ import annotations

import math
from collections import Counter
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from app.core.logging import get_logger
from app.models.criteria import (
    BlockingScheme,
    CriterionComponents,
    CriterionContext,
    CriterionValue,
    CriterionWeights,
)
from app.models.errors import CriterionError
from app.models.model import TermSpec, TreatmentIndicator
from app.services import numkernel
from app.services.model_matrix import build_model_matrix, build_treatment_indicator


logger = get_logger("services.criteria")


def q_matrix(scheme: BlockingScheme, m: int) -> np.ndarray:
    """Proyector ortogonal al espacio de la media y los bloques del estrato."""
    if scheme.m != m:
        raise CriterionError(f"El esquema tiene {scheme.m} unidades y el estrato {m}")
    if scheme.kind == "crd":
        q = np.eye(m) - np.full((m, m), 1.0 / m)
    else:
        q = np.eye(m) - numkernel.projector_onto_colspace(scheme.nuisance())
    return (q + q.T) / 2.0


def _blocked_rank(block_labels: np.ndarray, treatment_labels: np.ndarray) -> int:
    """Rango de [Z_b | T] = b + t − componentes conexas del grafo bloque–tratamiento."""
    _, blocks = np.unique(block_labels, return_inverse=True)
    _, treats = np.unique(treatment_labels, return_inverse=True)
    b = int(blocks.max()) + 1
    t = int(treats.max()) + 1
    data = np.ones(blocks.size)
    graph = coo_matrix((data, (blocks.reshape(-1), b + treats.reshape(-1))), shape=(b + t, b + t))
    n_components, _ = connected_components(graph, directed=False)
    return b + t - int(n_components)


def pure_error_df(scheme: BlockingScheme, T: TreatmentIndicator) -> int:
    """d = m − rank([nuisance | T]) con atajos para CRD y bloques simples."""
    m = T.values.shape[0]
    if scheme.m != m:
        raise CriterionError(f"El esquema tiene {scheme.m} unidades y la indicadora {m}")
    if scheme.kind == "crd":
        return m - T.t
    if scheme.kind == "blocked":
        return m - _blocked_rank(scheme.labels[0], T.labels)
    stacked = np.column_stack([scheme.nuisance(), T.values])
    return m - numkernel.rank(stacked, scale=1.0)


def _f_log(d1: int, d2: int, alpha: float) -> float:
    return math.log(numkernel.f_quantile(d1, d2, 1.0 - alpha))


def _log_value(
    weights: CriterionWeights, q: int, m: int, logdet: float, trace: float, d: int, singular: bool
) -> float:
    if singular or not math.isfinite(logdet):
        return -math.inf
    if d <= 0 and weights.kappa_dp + weights.kappa_lp > 0:
        return -math.inf
    log_v = 0.0
    if weights.kappa_d + weights.kappa_dp > 0:
        log_v += (weights.kappa_d + weights.kappa_dp) / q * logdet
    if weights.kappa_df > 0:
        log_v += (weights.kappa_df * math.log(m - d)) if m > d else -math.inf
    if weights.kappa_dp > 0:
        log_v -= weights.kappa_dp * _f_log(q, d, weights.alpha_dp)
    if weights.kappa_lp > 0:
        log_v -= weights.kappa_lp * _f_log(1, d, weights.alpha_lp)
    if weights.kappa_l + weights.kappa_lp > 0:
        log_v -= (weights.kappa_l + weights.kappa_lp) * math.log(trace)
    return log_v


def _make_value(
    weights: CriterionWeights, q: int, m: int, logdet: float, trace: float, d: int, singular: bool
) -> CriterionValue:
    log_v = _log_value(weights, q, m, logdet, trace, d, singular)
    value = math.exp(log_v) if math.isfinite(log_v) else 0.0
    return CriterionValue(
        value=value, log_value=log_v, singular=singular, d=int(d), logdet=float(logdet), trace=float(trace)
    )


def _information(ctx: CriterionContext) -> np.ndarray:
    x = ctx.X.values
    if x.shape[1] == 0:
        raise CriterionError("El modelo del estrato no tiene columnas además del intercepto")
    m_info = x.T @ ctx.Q @ x
    return (m_info + m_info.T) / 2.0


def _context_pure_error(ctx: CriterionContext) -> int:
    # m − rank(nuisance) = traza(Q)
    residual = int(round(float(np.trace(ctx.Q))))
    return residual - numkernel.rank(ctx.Q @ ctx.T.values, scale=1.0)


def compound_criterion(
    ctx: CriterionContext, weights: CriterionWeights, d: Optional[int] = None
) -> CriterionValue:
    """
    Valor del criterio compuesto calculado en escala logarítmica.

    Una matriz X'QX singular, o d = 0 con pesos de error puro, produce valor 0.
    """
    info = _information(ctx)
    w = weights.w_diagonal(ctx.spec) if ctx.spec is not None else None
    logdet, trace, singular = numkernel.spectral_summary(info, w, need_trace=True)
    if d is None:
        d = _context_pure_error(ctx) if weights.needs_pure_error else 0
    result = _make_value(weights, info.shape[0], ctx.m, logdet[0], trace[0], d, bool(singular[0]))
    if result.singular:
        logger.debug("X'QX singular; valor del criterio 0", extra={"m": ctx.m, "p": ctx.p})
    return result


def criterion_components(
    ctx: CriterionContext, weights: Optional[CriterionWeights] = None, w_diag: Optional[np.ndarray] = None
) -> CriterionComponents:
    """
    D_S (|X'QX|^{1/(p−1)}), A_S (tr W(X'QX)^{-1}), d y gl de falta de ajuste.

    W sale de `w_diag` si se da; si no, de la convención de `weights` sobre `ctx.spec`.
    Sin ninguno de los dos, W = I.
    """
    info = _information(ctx)
    if w_diag is None and weights is not None and ctx.spec is not None:
        w_diag = weights.w_diagonal(ctx.spec)
    logdet, trace, singular = numkernel.spectral_summary(info, w_diag, need_trace=True)
    q = info.shape[0]
    d_value = 0.0 if singular[0] else math.exp(logdet[0] / q)
    a_value = math.inf if singular[0] else float(trace[0])
    d = _context_pure_error(ctx)
    qt = ctx.Q @ ctx.T.values
    qx = ctx.Q @ ctx.X.values
    scale_x = float(np.max(np.linalg.norm(ctx.X.values, axis=0))) if ctx.X.values.size else 1.0
    lof = numkernel.rank(qt, scale=1.0) - numkernel.rank(qx, scale=max(scale_x, 1.0))
    return CriterionComponents(d_value=d_value, a_value=a_value, pure_error_df=d, lack_of_fit_df=lof)


class CriterionEvaluator:
    """
    Evaluador con estado de un estrato: mantiene Q, X, QX y M = X'QX del diseño
    actual y evalúa por lotes los intercambios de una fila mediante actualizaciones
    de rango dos.
    """

    def __init__(
        self,
        scheme: BlockingScheme,
        spec: TermSpec,
        weights: CriterionWeights,
        point_names: Sequence[str],
        label: str = "",
    ) -> None:
        self.scheme = scheme
        self.spec = spec
        self.weights = weights
        self.point_names = tuple(point_names)
        self.label = label
        self.m = scheme.m
        self.Q = q_matrix(scheme, self.m)
        self.q = len(spec.columns)
        if self.q == 0:
            raise CriterionError(f"El estrato {label or '?'} no tiene términos que estimar")
        self.w_diag = weights.w_diagonal(spec)
        self.points: Optional[np.ndarray] = None
        self.X: Optional[np.ndarray] = None
        self.QX: Optional[np.ndarray] = None
        self.M: Optional[np.ndarray] = None
        self._counts: Counter = Counter()

    # ------------------------------------------------------------------ estado
    def model_rows(self, rows: np.ndarray) -> np.ndarray:
        return build_model_matrix((np.atleast_2d(rows), self.point_names), self.spec).values

    def set_design(self, points: np.ndarray) -> None:
        points = np.asarray(points, dtype=float)
        if points.shape != (self.m, len(self.point_names)):
            raise CriterionError(
                f"Diseño con forma {points.shape}, se esperaba ({self.m}, {len(self.point_names)})"
            )
        self.points = points.copy()
        self.X = self.model_rows(self.points)
        self.QX = self.Q @ self.X
        self.M = self._symmetric(self.X.T @ self.QX)
        self._counts = Counter(map(tuple, self.points))

    @staticmethod
    def _symmetric(matrix: np.ndarray) -> np.ndarray:
        return (matrix + matrix.T) / 2.0

    def pure_error(self, points: Optional[np.ndarray] = None) -> int:
        pts = self.points if points is None else points
        return pure_error_df(self.scheme, build_treatment_indicator(pts))

    def _value(self, logdet: float, trace: float, d: int, singular: bool) -> CriterionValue:
        return _make_value(self.weights, self.q, self.m, logdet, trace, d, singular)

    def evaluate(self) -> CriterionValue:
        """Recalcula el criterio completo del diseño actual."""
        if self.M is None:
            raise CriterionError("El evaluador no tiene diseño")
        logdet, trace, singular = numkernel.spectral_summary(self.M, self.w_diag, need_trace=True)
        d = self.pure_error() if self.weights.needs_pure_error else 0
        return self._value(logdet[0], trace[0], d, bool(singular[0]))

    def evaluate_points(self, points: np.ndarray) -> CriterionValue:
        """Evalúa otro diseño sin alterar el estado del evaluador."""
        x = self.model_rows(points)
        info = self._symmetric(x.T @ self.Q @ x)
        logdet, trace, singular = numkernel.spectral_summary(info, self.w_diag, need_trace=True)
        d = self.pure_error(points) if self.weights.needs_pure_error else 0
        return self._value(logdet[0], trace[0], d, bool(singular[0]))

    # -------------------------------------------------------------- intercambio
    def _candidate_d(self, i: int, rows: np.ndarray) -> np.ndarray:
        current = tuple(self.points[i])
        if self.scheme.kind == "crd":
            t_without = len(self._counts) - (1 if self._counts[current] == 1 else 0)
            ds = np.empty(rows.shape[0], dtype=np.int64)
            for k, row in enumerate(rows):
                key = tuple(row)
                if key == current:
                    t_new = len(self._counts)
                else:
                    t_new = t_without + (0 if key in self._counts else 1)
                ds[k] = self.m - t_new
            return ds
        ds = np.empty(rows.shape[0], dtype=np.int64)
        trial = self.points.copy()
        for k, row in enumerate(rows):
            trial[i] = row
            ds[k] = self.pure_error(trial)
        return ds

    def exchange_keys(
        self, i: int, rows: np.ndarray, x_rows: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Claves (log v, d, logdet) de sustituir la fila i por cada fila candidata.

        M' = M + aδ' + δa' + Q_ii δδ', con a = (QX)_i y δ = x_nuevo − x_i.
        """
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        x_new = self.model_rows(rows) if x_rows is None else x_rows
        delta = x_new - self.X[i]
        a = self.QX[i]
        q_ii = self.Q[i, i]
        outer_ad = a[None, :, None] * delta[:, None, :]
        stack = (
            self.M[None, :, :]
            + outer_ad
            + np.transpose(outer_ad, (0, 2, 1))
            + q_ii * delta[:, :, None] * delta[:, None, :]
        )
        logdet, trace, singular = numkernel.spectral_summary(
            stack, self.w_diag, need_trace=self.weights.needs_trace
        )
        if self.weights.needs_pure_error:
            ds = self._candidate_d(i, rows)
        else:
            ds = np.zeros(rows.shape[0], dtype=np.int64)
        log_values = np.array(
            [
                _log_value(self.weights, self.q, self.m, logdet[k], trace[k], int(ds[k]), bool(singular[k]))
                for k in range(rows.shape[0])
            ]
        )
        return log_values, ds, logdet

    def apply(self, i: int, row: np.ndarray) -> None:
        """Sustituye la fila i y actualiza X, QX y M."""
        row = np.asarray(row, dtype=float)
        old = tuple(self.points[i])
        new_x = self.model_rows(row)[0]
        delta = new_x - self.X[i]
        self.points[i] = row
        self.X[i] = new_x
        self.QX += np.outer(self.Q[:, i], delta)
        self.M = self._symmetric(self.X.T @ self.QX)
        self._counts[old] -= 1
        if self._counts[old] == 0:
            del self._counts[old]
        self._counts[tuple(row)] += 1

    def components(self) -> CriterionComponents:
        ctx = CriterionContext(
            Q=self.Q,
            X=build_model_matrix((self.points, self.point_names), self.spec),
            T=build_treatment_indicator(self.points),
        )
        return criterion_components(ctx, self.weights, self.w_diag)


def describe_value(value: CriterionValue) -> Dict[str, float]:
    return {
        "value": value.value,
        "log_value": value.log_value,
        "pure_error_df": value.d,
        "logdet": value.logdet,
        "trace": value.trace,
        "singular": float(value.singular),
    }


__all__ = [
    "q_matrix",
    "pure_error_df",
    "compound_criterion",
    "criterion_components",
    "CriterionEvaluator",
    "describe_value",
]
