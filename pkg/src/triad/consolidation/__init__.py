from .consolidator import (
    Consolidator,
    EwcConsolidator,
    NullConsolidator,
    SiConsolidator,
    build_consolidator,
)
from .fisher import DEFAULT_FISHER_SAMPLES, Anchor, FisherMap, LossSpec, estimate_fisher, snapshot
from .penalty import consolidation_penalty, penalty_gradient
from .si import SIState, si_accumulate, si_finalize

__all__ = [
    "Anchor",
    "Consolidator",
    "DEFAULT_FISHER_SAMPLES",
    "EwcConsolidator",
    "FisherMap",
    "LossSpec",
    "NullConsolidator",
    "SIState",
    "SiConsolidator",
    "build_consolidator",
    "consolidation_penalty",
    "estimate_fisher",
    "penalty_gradient",
    "si_accumulate",
    "si_finalize",
    "snapshot",
]
