from __future__ import annotations

import json
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from uuid import uuid4

from triad.contracts import ForensicArtifact

UTC = timezone.utc


class TriadError(Exception):
    """Base class for contract violations raised by the engine."""


class ShapeError(TriadError, ValueError):
    pass


class NonFiniteError(TriadError, ArithmeticError):
    pass


class GraphStateError(TriadError, RuntimeError):
    pass


class GateError(TriadError, ValueError):
    pass


class MaskError(TriadError, ValueError):
    pass


class NetworkError(TriadError, ValueError):
    pass


class ConsolidationError(TriadError, ValueError):
    pass


class ReplayProtocolError(TriadError, RuntimeError):
    pass


class EventPayloadError(TriadError, ValueError):
    pass


class DiagnosticsError(TriadError, ValueError):
    pass


class UnknownDatasetError(TriadError, ValueError):
    pass


class ConfigParseError(TriadError, ValueError):
    def __init__(self, path: str, line: int, column: int, detail: str) -> None:
        super().__init__(f"{path}:{line}:{column}: {detail}")
        self.path = path
        self.line = line
        self.column = column


class CheckpointVersionError(TriadError, RuntimeError):
    def __init__(self, found: int, expected: int) -> None:
        super().__init__(f"checkpoint format version {found} does not match expected version {expected}")
        self.found = found
        self.expected = expected


class CheckpointCorruptionError(TriadError, RuntimeError):
    pass


class CheckpointMismatchError(TriadError, ValueError):
    pass


class EngineIntegrityError(RuntimeError):
    def __init__(self, artifact: ForensicArtifact) -> None:
        super().__init__(artifact.message)
        self.artifact = artifact


def build_forensic_artifact(
    engine_scope: str,
    error_code: str,
    message: str,
    state_snapshot: dict[str, object],
    context: dict[str, object],
    identifiers: dict[str, str],
    causal_fragment: list[str],
) -> ForensicArtifact:
    return ForensicArtifact(
        artifact_id=str(uuid4()),
        timestamp=datetime.now(UTC),
        engine_scope=engine_scope,
        error_code=error_code,
        message=message,
        state_snapshot=state_snapshot,
        context=context,
        identifiers=identifiers,
        causal_fragment=causal_fragment,
    )


def persist_forensic_artifact(artifact: ForensicArtifact, output_dir: Path) -> Path:
    output_dir.mkdir(parents=True, exist_ok=True)
    path = output_dir / f"forensic_{artifact.artifact_id}.json"
    path.write_text(json.dumps(asdict(artifact), default=str, indent=2), encoding="utf-8")
    return path
