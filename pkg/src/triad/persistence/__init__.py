from .analytics import MART_TABLES, AnalyticsStore
from .checkpoint import (
    CHECKPOINT_FORMAT_VERSION,
    Checkpoint,
    CheckpointStore,
    checkpoint_digest,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "AnalyticsStore",
    "CHECKPOINT_FORMAT_VERSION",
    "Checkpoint",
    "CheckpointStore",
    "MART_TABLES",
    "checkpoint_digest",
    "load_checkpoint",
    "save_checkpoint",
]
