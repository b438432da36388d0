"""
Conjuntos candidatos: factorial completo de los factores propios menos exclusiones.
"""
from __future__ import annotations

from itertools import product
from typing import Mapping, Sequence

import numpy as np

from app.core.logging import get_logger
from app.models.errors import ModelSpecError
from app.models.model import Factor
from app.models.search import CandidateSet


logger = get_logger("services.candidates")


def build_candidates(
    factors: Sequence[Factor], exclusions: Sequence[Mapping[str, float]] = ()
) -> CandidateSet:
    """
    Factorial completo (último factor más rápido). Una fila se elimina si coincide
    con todos los pares {factor: nivel} de alguna exclusión; las exclusiones que
    nombran factores ajenos se ignoran.
    """
    if not factors:
        raise ModelSpecError("No hay factores para generar candidatos")
    names = tuple(f.name for f in factors)
    full = np.array(list(product(*(f.levels for f in factors))), dtype=float)
    keep = np.ones(full.shape[0], dtype=bool)
    applicable = [ex for ex in exclusions if ex and set(ex) <= set(names)]
    for ex in applicable:
        hit = np.ones(full.shape[0], dtype=bool)
        for name, level in ex.items():
            hit &= np.isclose(full[:, names.index(name)], float(level))
        keep &= ~hit
    removed = int((~keep).sum())
    sizes = [len(f.levels) for f in factors]
    base = f"{sizes[0]}^{len(sizes)}" if len(set(sizes)) == 1 else "x".join(map(str, sizes))
    provenance = f"{base} factorial" + (f" minus {removed} excluded" if removed else "")
    if not keep.any():
        raise ModelSpecError("Las exclusiones eliminan todos los candidatos")
    logger.debug("Candidatos generados", extra={"factors": names, "size": int(keep.sum()), "removed": removed})
    return CandidateSet(points=full[keep], factor_names=names, provenance=provenance)


__all__ = ["build_candidates"]
