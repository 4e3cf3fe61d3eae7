from .errors import (
    CheckpointCorruptionError,
    CheckpointMismatchError,
    CheckpointVersionError,
    ConfigParseError,
    ConsolidationError,
    DiagnosticsError,
    EngineIntegrityError,
    EventPayloadError,
    GateError,
    GraphStateError,
    MaskError,
    NetworkError,
    NonFiniteError,
    ReplayProtocolError,
    ShapeError,
    TriadError,
    UnknownDatasetError,
    build_forensic_artifact,
    persist_forensic_artifact,
)
from .events import EventBus, payload_keys
from .ids import canonical_json, digest_of, run_id
from .randomness import NumpyRandomSource, seeded_random

__all__ = [
    "CheckpointCorruptionError",
    "CheckpointMismatchError",
    "CheckpointVersionError",
    "ConfigParseError",
    "ConsolidationError",
    "DiagnosticsError",
    "EngineIntegrityError",
    "EventPayloadError",
    "EventBus",
    "GateError",
    "GraphStateError",
    "MaskError",
    "NetworkError",
    "NonFiniteError",
    "NumpyRandomSource",
    "ReplayProtocolError",
    "ShapeError",
    "TriadError",
    "UnknownDatasetError",
    "build_forensic_artifact",
    "canonical_json",
    "digest_of",
    "payload_keys",
    "persist_forensic_artifact",
    "run_id",
    "seeded_random",
]
