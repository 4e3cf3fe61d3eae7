from __future__ import annotations

from typing import Sequence

import numpy as np

from triad.consolidation import FisherMap
from triad.contracts import SimilarityRow
from triad.core.errors import DiagnosticsError, ShapeError


def group_vector(fisher: FisherMap, group: str) -> np.ndarray:
    """Flattened importance of one parameter, or of every ``group.*`` parameter."""
    if group in fisher.importance:
        return np.ravel(fisher.importance[group])
    members = sorted(name for name in fisher.importance if name.startswith(f"{group}."))
    if not members:
        raise DiagnosticsError(f"group '{group}' is absent from the importance map")
    return np.concatenate([np.ravel(fisher.importance[name]) for name in members])


def _paired(f_a: FisherMap, f_b: FisherMap, group: str) -> tuple[np.ndarray, np.ndarray]:
    a = group_vector(f_a, group)
    b = group_vector(f_b, group)
    if a.shape != b.shape:
        raise ShapeError(f"group '{group}' has shape {a.shape} in one map and {b.shape} in the other")
    return a, b


def fim_cosine_similarity(f_a: FisherMap, f_b: FisherMap, group: str) -> float:
    a, b = _paired(f_a, f_b, group)
    norm = float(np.linalg.norm(a)) * float(np.linalg.norm(b))
    if norm == 0.0:
        return 0.0
    return float(np.dot(a, b) / norm)


def fim_correlation(f_a: FisherMap, f_b: FisherMap, group: str) -> float:
    a, b = _paired(f_a, f_b, group)
    if a.size < 2:
        raise DiagnosticsError(f"correlation of group '{group}' needs at least two entries")
    da = a - a.mean()
    db = b - b.mean()
    spread = float(np.sqrt(np.dot(da, da) * np.dot(db, db)))
    if spread == 0.0:
        return 0.0
    return float(np.clip(np.dot(da, db) / spread, -1.0, 1.0))


def similarity_rows(
    f_a: FisherMap,
    f_b: FisherMap,
    groups: Sequence[str],
    lambda_c: float | None = None,
) -> list[SimilarityRow]:
    return [
        SimilarityRow(
            group=group,
            cosine=fim_cosine_similarity(f_a, f_b, group),
            correlation=fim_correlation(f_a, f_b, group),
            lambda_c=lambda_c,
        )
        for group in groups
    ]
