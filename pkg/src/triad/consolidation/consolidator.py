from __future__ import annotations

import logging
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from triad.autodiff import Tensor
from triad.contracts import ConsolidationKind, FisherCombine, ImportanceSource
from triad.consolidation.fisher import Anchor, FisherMap, snapshot
from triad.consolidation.penalty import consolidation_penalty
from triad.consolidation.si import DEFAULT_XI, SIState, si_accumulate, si_finalize

logger = logging.getLogger(__name__)

ImportanceEstimator = Callable[[], FisherMap]


class Consolidator:
    """Importance + anchor pair behind one interface; subclasses decide how
    importance is produced at a task boundary."""

    kind = ConsolidationKind.NONE

    def __init__(self, lam: float, *, combine: FisherCombine = FisherCombine.SUM) -> None:
        self.lam = float(lam)
        self.combine = combine
        self.fisher: FisherMap | None = None
        self.anchor: Anchor | None = None

    def penalty(self, params: Mapping[str, Tensor]) -> Tensor:
        return consolidation_penalty(params, self.anchor, self.fisher, self.lam)

    def begin_task(self, params: Mapping[str, np.ndarray]) -> None:
        pass

    def observe_step(
        self,
        before: Mapping[str, np.ndarray],
        after: Mapping[str, np.ndarray],
        grads: Mapping[str, np.ndarray],
    ) -> None:
        pass

    def end_task(
        self,
        params: Mapping[str, np.ndarray],
        task: int,
        estimate: ImportanceEstimator,
        excluded: Iterable[str],
    ) -> None:
        pass

    def export_state(self) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
        arrays: dict[str, np.ndarray] = {}
        meta: dict[str, Any] = {"kind": self.kind.value, "lam": self.lam, "combine": self.combine.value}
        if self.fisher is not None:
            for name, values in self.fisher.importance.items():
                arrays[f"fisher/{name}"] = values
            meta["fisher_source"] = self.fisher.source.value
            meta["excluded"] = sorted(self.fisher.excluded)
        if self.anchor is not None:
            for name, values in self.anchor.values.items():
                arrays[f"anchor/{name}"] = values
            meta["anchor_task"] = self.anchor.task
        return arrays, meta

    def restore_state(self, arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any]) -> None:
        fisher = _strip(arrays, "fisher/")
        anchor = _strip(arrays, "anchor/")
        self.fisher = (
            FisherMap(fisher, ImportanceSource(meta["fisher_source"]), frozenset(meta.get("excluded", ())))
            if "fisher_source" in meta
            else None
        )
        self.anchor = Anchor(anchor, int(meta["anchor_task"])) if "anchor_task" in meta else None


class NullConsolidator(Consolidator):
    kind = ConsolidationKind.NONE


class EwcConsolidator(Consolidator):
    kind = ConsolidationKind.EWC

    def end_task(
        self,
        params: Mapping[str, np.ndarray],
        task: int,
        estimate: ImportanceEstimator,
        excluded: Iterable[str],
    ) -> None:
        fresh = estimate()
        self.fisher = fresh if self.fisher is None else self.fisher.combine(fresh, self.combine)
        self.anchor = snapshot(params, task)
        logger.debug("EWC anchor captured after task %d (%s)", task, fresh.source.value)


class SiConsolidator(Consolidator):
    kind = ConsolidationKind.SI

    def __init__(self, lam: float, *, xi: float = DEFAULT_XI, combine: FisherCombine = FisherCombine.SUM) -> None:
        super().__init__(lam, combine=combine)
        self.si = SIState(xi=xi)

    def begin_task(self, params: Mapping[str, np.ndarray]) -> None:
        self.si.begin_task(params)

    def observe_step(
        self,
        before: Mapping[str, np.ndarray],
        after: Mapping[str, np.ndarray],
        grads: Mapping[str, np.ndarray],
    ) -> None:
        si_accumulate(self.si, before, after, grads)

    def end_task(
        self,
        params: Mapping[str, np.ndarray],
        task: int,
        estimate: ImportanceEstimator,
        excluded: Iterable[str],
    ) -> None:
        self.fisher = si_finalize(self.si, params, excluded)
        self.anchor = snapshot(params, task)
        logger.debug("SI importance closed after task %d", task)

    def export_state(self) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
        arrays, meta = super().export_state()
        tables = (
            ("si.running/", self.si.running),
            ("si.start/", self.si.task_start),
            ("si.omega/", self.si.omega),
        )
        for prefix, table in tables:
            for name, values in table.items():
                arrays[f"{prefix}{name}"] = values
        meta["xi"] = self.si.xi
        return arrays, meta

    def restore_state(self, arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any]) -> None:
        super().restore_state(arrays, meta)
        self.si = SIState(
            xi=float(meta.get("xi", DEFAULT_XI)),
            running=_strip(arrays, "si.running/"),
            task_start=_strip(arrays, "si.start/"),
            omega=_strip(arrays, "si.omega/"),
        )


def build_consolidator(
    kind: ConsolidationKind,
    lam: float,
    *,
    xi: float = DEFAULT_XI,
    combine: FisherCombine = FisherCombine.SUM,
) -> Consolidator:
    if kind is ConsolidationKind.EWC:
        return EwcConsolidator(lam, combine=combine)
    if kind is ConsolidationKind.SI:
        return SiConsolidator(lam, xi=xi, combine=combine)
    return NullConsolidator(lam, combine=combine)


def _strip(arrays: Mapping[str, np.ndarray], prefix: str) -> dict[str, np.ndarray]:
    return {key[len(prefix) :]: np.array(values) for key, values in arrays.items() if key.startswith(prefix)}
