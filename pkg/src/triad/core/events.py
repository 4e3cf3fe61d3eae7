from __future__ import annotations

from collections import Counter
from dataclasses import fields
from typing import Callable

from triad.contracts import MetricsRow, TrainingEvent, TrainingEventType
from triad.core.errors import EventPayloadError

TrainingHandler = Callable[[TrainingEvent], None]

_METRICS_KEYS = frozenset(f.name for f in fields(MetricsRow))

# keys each event kind must carry; extra keys are allowed
_PAYLOAD_KEYS: dict[TrainingEventType, frozenset[str]] = {
    TrainingEventType.EPOCH_COMPLETE: _METRICS_KEYS,
    TrainingEventType.TASK_COMPLETE: frozenset({"replay_size"}),
    TrainingEventType.CHECKPOINT_WRITTEN: frozenset({"path"}),
    TrainingEventType.RUN_COMPLETE: frozenset({"run_id", "a_t"}),
}


def payload_keys(event_type: TrainingEventType | str) -> frozenset[str]:
    return _PAYLOAD_KEYS[TrainingEventType(event_type)]


class EventBus:
    """Synchronous fan-out of training events.

    Payloads are checked against their kind before any handler runs, so a sink
    never sees a metrics event without metrics or a checkpoint event without a
    path.
    """

    def __init__(self) -> None:
        self._handlers: list[tuple[TrainingEventType | None, TrainingHandler]] = []
        self._by_scope: Counter[str] = Counter()
        self._by_type: Counter[TrainingEventType] = Counter()

    def subscribe(self, handler: TrainingHandler, *, event_type: TrainingEventType | None = None) -> None:
        self._handlers.append((event_type, handler))

    def publish(self, event: TrainingEvent) -> None:
        try:
            kind = TrainingEventType(event.event_type)
        except ValueError as exc:
            raise EventPayloadError(f"unknown event type '{event.event_type}'") from exc
        missing = sorted(_PAYLOAD_KEYS[kind] - event.payload.keys())
        if missing:
            raise EventPayloadError(f"{kind.value} event from '{event.scope}' lacks payload keys {missing}")
        event.event_type = kind
        self._by_scope[event.scope] += 1
        self._by_type[kind] += 1
        for wanted, handler in self._handlers:
            if wanted is None or wanted is kind:
                handler(event)

    def emitted_count(self, scope: str | None = None, *, event_type: TrainingEventType | None = None) -> int:
        if event_type is not None:
            return self._by_type[TrainingEventType(event_type)]
        if scope is None:
            return sum(self._by_scope.values())
        return self._by_scope[scope]
