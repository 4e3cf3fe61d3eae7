from __future__ import annotations

from typing import Mapping

import numpy as np

from triad.autodiff import Tensor
from triad.consolidation.fisher import Anchor, FisherMap
from triad.core.errors import ConsolidationError, ShapeError


def consolidation_penalty(
    params: Mapping[str, Tensor],
    anchor: Anchor | None,
    fisher: FisherMap | None,
    lam: float,
) -> Tensor:
    """λ Σ F_i (θ_i − θ*_i)² over penalized parameters present in ``params``."""
    if lam < 0:
        raise ConsolidationError("lambda must be >= 0")
    if lam == 0.0 or fisher is None:
        return Tensor(0.0)
    if anchor is None:
        raise ConsolidationError("importance is set but no anchor was captured")
    total: Tensor | None = None
    for name in fisher.penalized():
        if name not in params:
            continue
        if name not in anchor.values:
            raise ConsolidationError(f"no anchor value for penalized parameter '{name}'")
        theta = params[name]
        target = anchor.values[name]
        if target.shape != theta.shape:
            raise ShapeError(f"anchor for '{name}' has shape {target.shape}, parameter has {theta.shape}")
        drift = theta - target
        term = (drift * drift * fisher.importance[name]).sum()
        total = term if total is None else total + term
    if total is None:
        return Tensor(0.0)
    return total * lam


def penalty_gradient(
    params: Mapping[str, np.ndarray],
    anchor: Anchor,
    fisher: FisherMap,
    lam: float,
) -> dict[str, np.ndarray]:
    """Closed form 2λF(θ − θ*) for penalized parameters."""
    return {
        name: 2.0 * lam * fisher.importance[name] * (params[name] - anchor.values[name])
        for name in fisher.penalized()
        if name in params
    }
